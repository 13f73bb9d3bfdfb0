"""Seeding and Gaussian increment streams.

Every simulation draws its increments from a Philox (counter-based) stream
keyed by a 64-bit seed, in fixed-size blocks, so two runs with the same seed
and the same number of noise drivers consume identical numbers.  Item ``i`` of
a sweep uses ``split_seed(seed, i)``.
"""

from __future__ import annotations

import os
from typing import Iterator

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
BLOCK = 1 << 16


def split_seed(seed: int, i: int) -> int:
    """``seed XOR (GOLDEN * (i + 1)) mod 2**64``."""
    return (int(seed) ^ ((GOLDEN * (int(i) + 1)) & MASK64)) & MASK64


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))


def normal_blocks(seed: int, n_steps: int, k: int, block: int = BLOCK) -> Iterator[np.ndarray]:
    """Yield standard normal arrays of shape ``(m, k)`` covering ``n_steps`` rows."""
    gen = generator(seed)
    done = 0
    while done < n_steps:
        m = min(block, n_steps - done)
        if k:
            yield gen.standard_normal((m, k))
        else:
            yield np.zeros((m, 0))
        done += m


def n_threads() -> int:
    """Worker count, capped by ``PATCHDYN_THREADS`` when set."""
    env = os.environ.get("PATCHDYN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1
