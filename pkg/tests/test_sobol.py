from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import qmc

from stoc_order.errors import ConfigurationError
from stoc_order.sobol import (BITS, DIRECTION_SETS, SobolGenerator, direction_numbers,
                              sobol_next)


def test_first_points_one_dimension():
    g = SobolGenerator(1, "joe-kuo")
    assert [float(sobol_next(g)[0]) for _ in range(3)] == [0.5, 0.75, 0.25]
    g = SobolGenerator(1)
    assert {float(g.next()[0]) for _ in range(3)} == {0.5, 0.75, 0.25}


@pytest.mark.parametrize("dim", [1, 2, 5, 12, 21])
def test_joe_kuo_matches_scipy(dim):
    # scipy emits the origin first; ours starts at index 1
    ours = np.vstack([np.zeros((1, dim)), SobolGenerator(dim, "joe-kuo").block(1, 1023)])
    ref = qmc.Sobol(dim, scramble=False).random_base2(10)
    np.testing.assert_array_equal(ours, ref)


@pytest.mark.parametrize("directions", sorted(DIRECTION_SETS))
def test_stratification_of_dyadic_blocks(directions):
    # every coordinate of the first 2^k points (origin included) hits each 2^-k cell once
    dim = min(8, len(DIRECTION_SETS[directions]))
    pts = np.vstack([np.zeros((1, dim)), SobolGenerator(dim, directions).block(1, 255)])
    for j in range(dim):
        cells = np.floor(pts[:, j] * 256).astype(int)
        assert sorted(cells) == list(range(256))


def test_range_and_determinism():
    a = SobolGenerator(12).block(1, 5000)
    b = SobolGenerator(12).block(1, 5000)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() < 1.0
    assert not np.any(np.all(a == 0.0, axis=1))


@given(st.integers(1, 20), st.integers(1, 3000), st.integers(0, 200))
def test_block_matches_sequential(dim, start, count):
    g = SobolGenerator(dim)
    for _ in range(start - 1):
        g.next()
    seq = np.array([g.next() for _ in range(count)]).reshape(count, dim)
    np.testing.assert_array_equal(SobolGenerator(dim).block(start, count), seq)


def test_reset_restarts():
    g = SobolGenerator(3)
    first = [g.next() for _ in range(10)]
    g.reset()
    np.testing.assert_array_equal(first, [g.next() for _ in range(10)])


def test_lower_discrepancy_than_pseudo_random():
    pts = SobolGenerator(2).block(1, 4096)
    rnd = np.random.default_rng(1).random((4096, 2))
    assert qmc.discrepancy(pts) < qmc.discrepancy(rnd) / 5


def test_direction_numbers_odd_and_in_range():
    V = direction_numbers(20)
    for b in range(BITS):
        top = V[:, b] >> np.uint64(BITS - 1 - b)
        assert np.all(top % 2 == 1)
        assert np.all(top < np.uint64(1 << (b + 1)))


def test_too_many_dimensions():
    with pytest.raises(ConfigurationError):
        SobolGenerator(len(DIRECTION_SETS["nr+joe-kuo"]) + 1)
    with pytest.raises(ConfigurationError):
        SobolGenerator(2, "no-such-set")
    with pytest.raises(ConfigurationError):
        SobolGenerator(2).block(0, 10)


def test_version_string():
    assert SobolGenerator(2).version == "sobol-gray-30bit/nr+joe-kuo"
