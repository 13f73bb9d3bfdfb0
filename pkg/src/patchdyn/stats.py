"""Batch-means standard errors for time series from ergodic simulations."""

from __future__ import annotations

import numpy as np


def batch_means(x, n_batches: int = 50):
    """Mean of ``x`` and its batch-means standard error.

    Leading samples that do not fill a whole batch are dropped.  Returns
    ``(mean, stderr, means)``.
    """
    x = np.asarray(x, dtype=float)
    size = x.size // n_batches
    if size < 1:
        raise ValueError(f"need at least {n_batches} samples, got {x.size}")
    x = x[x.size - size * n_batches :]
    means = x.reshape(n_batches, size).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(n_batches)), means


def stderr_of(means) -> float:
    means = np.asarray(means, dtype=float)
    return float(means.std(ddof=1) / np.sqrt(means.size))


def halves_disagree(means, k: float = 5.0) -> bool:
    """Crude stationarity check: first and second half of the batches differ by > k pooled SE."""
    means = np.asarray(means, dtype=float)
    h = means.size // 2
    a, b = means[:h], means[h:]
    pooled = np.hypot(stderr_of(a), stderr_of(b))
    return bool(abs(a.mean() - b.mean()) > k * pooled)
