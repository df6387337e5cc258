import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistlab.rng import CHUNK, DEFAULT_SEED, chunk_sizes, map_chunks, reduce_moments, substream


def test_default_seed():
    assert DEFAULT_SEED == 20170601


def test_substream_is_deterministic_and_keyed():
    a = substream(1, "x", 0).random(5)
    assert np.array_equal(a, substream(1, "x", 0).random(5))
    assert not np.array_equal(a, substream(1, "x", 1).random(5))
    assert not np.array_equal(a, substream(1, "y", 0).random(5))
    assert not np.array_equal(a, substream(2, "x", 0).random(5))
    assert not np.array_equal(substream(1, 0.5).random(3), substream(1, 0.25).random(3))


def test_substream_uses_philox():
    assert isinstance(substream(0).bit_generator, np.random.Philox)


@given(st.integers(0, 10**6), st.integers(1, 5000))
@settings(max_examples=50, deadline=None)
def test_chunk_sizes_partition_total(total, chunk):
    sizes = chunk_sizes(total, chunk)
    assert sum(sizes) == total
    assert all(0 < s <= chunk for s in sizes)
    assert all(s == chunk for s in sizes[:-1])


def test_map_chunks_independent_of_workers():
    fn = lambda rng, m: rng.random(m).sum()
    total = 5 * CHUNK + 123
    one = map_chunks(fn, total, 3, ("k",), workers=1)
    many = map_chunks(fn, total, 3, ("k",), workers=4)
    assert one == many and len(one) == 6
    assert map_chunks(fn, total, 3, "k") == one


def test_reduce_moments_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.random(10_000)
    parts = [(c.sum(), (c * c).sum(), len(c)) for c in np.array_split(x, 7)]
    mean, se, n = reduce_moments(parts)
    assert n == len(x)
    assert mean == pytest.approx(x.mean(), rel=1e-13)
    assert se == pytest.approx(x.std() / np.sqrt(len(x)), rel=1e-10)
    assert reduce_moments([(2.0, 4.0, 1), (2.0, 4.0, 1)]) == (2.0, 0.0, 2)
