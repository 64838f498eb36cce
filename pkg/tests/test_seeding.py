import numpy as np
import pytest

from addcoal.seeding import make_rng, splitmix64, substream_rng, substream_seed


def test_splitmix64_is_64_bit():
    for z in (0, 1, 2**63, 2**64 - 1, 123456789):
        out = splitmix64(z)
        assert 0 <= out < 2**64


def test_substream_seeds_distinct():
    seeds = {substream_seed(42, i) for i in range(10_000)}
    assert len(seeds) == 10_000


def test_substream_seeds_differ_across_masters():
    a = [substream_seed(1, i) for i in range(100)]
    b = [substream_seed(2, i) for i in range(100)]
    assert not set(a) & set(b)


def test_substream_rejects_negative_index():
    with pytest.raises(ValueError):
        substream_seed(0, -1)


def test_rng_reproducible():
    x = make_rng(7).random(16)
    y = make_rng(7).random(16)
    assert np.array_equal(x, y)
    z = substream_rng(7, 3).random(16)
    w = substream_rng(7, 3).random(16)
    assert np.array_equal(z, w)
    assert not np.array_equal(x, z)
