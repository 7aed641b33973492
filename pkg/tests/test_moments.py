import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bayestree import ModelParams, build_index
from bayestree.moments import Indicator, Power, cell_mean, moment

import _oracles as orc
from strategies import datasets, light_datasets, params

unit = st.floats(0.0, 1.0, exclude_max=True)


def test_prior_moments():
    for k in range(6):
        assert moment([], Power(k)) == pytest.approx(1.0 / (k + 1), rel=1e-15)
    for a in (0.0, 0.25, 0.3, 0.999):
        assert moment([], Indicator(a)) == pytest.approx(a, abs=1e-15)


@pytest.mark.parametrize("c", [0.9, 0.3, 0.5, 0.0, 0.7123])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_single_point_power_moment_matches_dyadic_sum(c, k):
    assert moment([c], Power(k)) == pytest.approx(orc.singleton_moment(c, k), rel=1e-12)


def test_single_point_mean_value():
    assert moment([0.9], Power(1)) == pytest.approx(0.5495495, abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(unit, unit)
def test_single_point_cdf_matches_dyadic_sum(c, a):
    assert moment([c], Indicator(a)) == pytest.approx(orc.singleton_cdf(c, a), rel=1e-12, abs=1e-15)


@settings(max_examples=80, deadline=None)
@given(datasets(max_size=30), params)
def test_constant_moment_is_exactly_one(pts, p):
    assert moment(pts, Power(0), p) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(datasets(max_size=30), st.integers(1, 4))
def test_power_moments_are_decreasing_and_bounded(pts, k):
    lo, hi = moment(pts, Power(k + 1)), moment(pts, Power(k))
    assert 0.0 <= lo <= hi + 1e-15 <= 1.0 + 1e-12


@settings(max_examples=60, deadline=None)
@given(datasets(max_size=30), unit, unit)
def test_cdf_monotone(pts, a, b):
    a, b = sorted((a, b))
    idx = build_index(pts)
    fa = moment(pts, Indicator(a), index=idx)
    fb = moment(pts, Indicator(b), index=idx)
    assert -1e-15 <= fa <= fb + 1e-13 and fb <= 1.0 + 1e-13


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2**30 - 1), max_size=20), params)
def test_mean_reflects(ks, p):
    # off-grid points so that x -> 1 - x maps cells to cells at every depth
    pts = [(k + 1 / 3) / 2**30 for k in ks]
    m1 = moment(pts, Power(1), p)
    m2 = moment([1.0 - x for x in pts], Power(1), p)
    assert m1 + m2 == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(light_datasets(max_size=15), st.sampled_from([2, 5]))
def test_min_depth_independent(pts, m):
    a = moment(pts, Power(2))
    b = moment(pts, Power(2), min_depth=m)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-15)


def test_mean_is_integral_of_cdf():
    pts = [0.1, 0.12, 0.5, 0.5, 0.77]
    idx = build_index(pts)
    # E[X] = 1 - integral of F over [0, 1), approximated on a fine grid
    xs = (np.arange(20000) + 0.5) / 20000
    F = np.array([moment(pts, Indicator(x), index=idx) for x in xs])
    assert 1.0 - F.mean() == pytest.approx(moment(pts, Power(1), index=idx), abs=1e-6)


def test_heavy_point_mean():
    # a heavy point always splits; at each level 1/7 of the remaining mass
    # spreads uniformly over the sibling of the point's cell
    lo, w, E, keep = 0.0, 1.0, 0.0, 1.0
    for _ in range(200):
        w /= 2
        sib = lo + w if 0.3 < lo + w else lo
        if 0.3 >= lo + w:
            lo += w
        E += keep / 7 * (sib + w / 2)
        keep *= 6 / 7
    E += keep * 0.3
    assert moment([0.3] * 5, Power(1)) == pytest.approx(E, rel=1e-12)
    assert moment([0.3] * 5, Indicator(0.3)) < moment([0.3] * 5, Indicator(0.30001))


def test_cell_mean_narrow_cells():
    lo, w = 0.7, 2.0**-50
    assert float(cell_mean(3, lo, w)) == pytest.approx(lo**3, rel=1e-14)
    assert float(cell_mean(2, 0.0, 1.0)) == pytest.approx(1 / 3, rel=1e-15)


def test_specs_validate():
    with pytest.raises(ValueError):
        Power(-1)
    with pytest.raises(ValueError):
        Power(1.5)
    with pytest.raises(ValueError):
        Indicator(1.0)
    with pytest.raises(TypeError):
        moment([0.2], object())
