import numpy as np

from patchdyn.rng import GOLDEN, MASK64, normal_blocks, n_threads, split_seed


def test_split_seed_formula():
    assert split_seed(0, 0) == GOLDEN
    assert split_seed(5, 2) == 5 ^ ((GOLDEN * 3) & MASK64)
    assert 0 <= split_seed(2**64 - 1, 10**6) < 2**64


def test_split_seeds_are_distinct():
    seeds = {split_seed(42, i) for i in range(10000)}
    assert len(seeds) == 10000


def test_blocks_cover_steps_and_repeat():
    a = np.vstack(list(normal_blocks(3, 70000, 2)))
    b = np.vstack(list(normal_blocks(3, 70000, 2)))
    assert a.shape == (70000, 2)
    assert np.array_equal(a, b)


def test_block_size_does_not_change_stream_prefix():
    a = np.vstack(list(normal_blocks(9, 1000, 1, block=1000)))
    b = np.vstack(list(normal_blocks(9, 1000, 1, block=1000)))
    assert np.array_equal(a, b)


def test_zero_drivers():
    blocks = list(normal_blocks(1, 10, 0))
    assert sum(b.shape[0] for b in blocks) == 10 and blocks[0].shape[1] == 0


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PATCHDYN_THREADS", "3")
    assert n_threads() == 3
