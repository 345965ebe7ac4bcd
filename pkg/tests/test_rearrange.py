import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixsing.errors import InvalidInput
from mixsing.grid import Domain, GridFunction, build_grid, sample_function
from mixsing.rearrange import (RearrangedProfile, decreasing_rearrangement, distribution_function,
                               hardy_littlewood_gap, profile_distance, profile_lp_norm,
                               schwarz_rearrangement, unit_ball_volume)

EX = [(3, 0.2), (1, 0.3)]


def cells(n_min=1, n_max=25):
    return st.integers(n_min, n_max).flatmap(lambda k: st.tuples(
        st.lists(st.floats(-10, 10, allow_nan=False), min_size=k, max_size=k),
        st.lists(st.floats(1e-3, 1.0), min_size=k, max_size=k)))


def test_distribution_example():
    mu = distribution_function(EX)
    np.testing.assert_allclose(mu([0, 0.5, 0.999, 1, 2, 2.999, 3, 7]), [0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 0, 0])


def test_distribution_zero_and_empty():
    mu = distribution_function([(0.0, 1.0), (0.0, 2.0)])
    assert mu(0.0) == 0 and mu(5.0) == 0
    with pytest.raises(InvalidInput):
        distribution_function([])


def test_distribution_tent_converges():
    for N in (16, 64, 256):
        g = build_grid(Domain.interval(-1, 1), N)
        u = sample_function(g, lambda x: 1 - np.abs(x))
        assert abs(distribution_function(u)(0.5) - 1.0) <= g.h


def test_rearrangement_example():
    p = decreasing_rearrangement(EX)
    np.testing.assert_allclose(p.breakpoints, [0, 0.2, 0.5])
    np.testing.assert_allclose(p.values, [3, 1])
    assert profile_lp_norm(p, 1) == pytest.approx(0.9)
    assert profile_lp_norm(p, math.inf) == 3
    assert profile_lp_norm(p, 2) == pytest.approx(math.sqrt(2.1))
    with pytest.raises(InvalidInput):
        profile_lp_norm(p, 0.5)


def test_constant_and_ties():
    p = decreasing_rearrangement([(2.0, 0.5), (2.0, 0.25), (-2.0, 0.25)])
    assert len(p.values) == 1 and p.values[0] == 2.0 and p.breakpoints[-1] == 1.0


def test_gridfunction_padding():
    g = build_grid(Domain.interval(-1, 1), 8)
    u = GridFunction(g, np.ones(g.size))
    p = decreasing_rearrangement(u)
    assert p.total_measure == 2.0
    np.testing.assert_allclose(p.breakpoints, [0, 1.75, 2.0])
    np.testing.assert_allclose(p.values, [1, 0])


def test_schwarz():
    V = 2.0
    s = np.linspace(0, V, 4001)
    p = RearrangedProfile(s, 1 - s[:-1] / 2, V)
    us = schwarz_rearrangement(p, 1)
    x = np.linspace(-0.99, 0.99, 41)
    np.testing.assert_allclose(us(x), 1 - np.abs(x), atol=1e-3)
    assert us(0.0) == p.values[0]
    disc = schwarz_rearrangement(RearrangedProfile([0, math.pi], [1.0], math.pi), 2)
    np.testing.assert_allclose(disc(np.array([[0, 0], [0.5, 0.5], [0.99, 0], [0.8, 0.8]])), [1, 1, 1, 0])
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_hardy_littlewood_examples():
    g = build_grid(Domain.interval(-1, 1), 4)
    x = g.interior_nodes[:, 0]
    u = GridFunction(g, (x > 0).astype(float))
    v = GridFunction(g, (x < 0).astype(float))
    assert hardy_littlewood_gap(u, u) == pytest.approx(0, abs=1e-15)
    # with node-cells of width 1/2: u, v each one cell; ∫u*v* = 1/2, ∫uv = 0
    assert hardy_littlewood_gap(u, v) == pytest.approx(0.5)
    with pytest.raises(InvalidInput):
        hardy_littlewood_gap(u, GridFunction(build_grid(g.domain, 5), np.zeros(4)))


def test_hardy_littlewood_indicator_fine():
    # indicators of (0,1) and (−1,0): the gap tends to 1
    g = build_grid(Domain.interval(-1, 1), 400)
    x = g.interior_nodes[:, 0]
    gap = hardy_littlewood_gap(GridFunction(g, (x > 0) * 1.0), GridFunction(g, (x < 0) * 1.0))
    assert gap == pytest.approx(1.0, abs=2 * g.h)


def test_profile_csv_roundtrip(tmp_path):
    p = decreasing_rearrangement(EX, volume=1.0)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    assert path.read_text().startswith("# mixsing profile v1, volume=1.0\ns_breakpoint,value\n")
    q = RearrangedProfile.from_csv(str(path))
    np.testing.assert_array_equal(q.breakpoints, p.breakpoints)
    np.testing.assert_array_equal(q.values, p.values)


def test_profile_validation():
    with pytest.raises(InvalidInput):
        RearrangedProfile([0, 1, 2], [1, 2], 2)
    with pytest.raises(InvalidInput):
        RearrangedProfile([0, 3], [1], 2)
    with pytest.raises(InvalidInput):
        decreasing_rearrangement(EX, volume=0.4)


@settings(max_examples=200, deadline=None)
@given(cells())
def test_equimeasurable_and_norms(data):
    vals, meas = map(np.array, data)
    p = decreasing_rearrangement((vals, meas))
    assert distribution_function((vals, meas)).equals(p.distribution(), atol=1e-12)
    for q in (1, 2, 5):
        exact = np.sum(np.abs(vals) ** q * meas) ** (1 / q)
        assert profile_lp_norm(p, q) == pytest.approx(exact, rel=1e-12, abs=1e-300)
    assert profile_lp_norm(p, math.inf) == np.max(np.abs(vals))


@settings(max_examples=100, deadline=None)
@given(cells(), st.floats(0, 5))
def test_shift_property(data, c):
    vals, meas = np.abs(np.array(data[0])), np.array(data[1])
    pu = decreasing_rearrangement((vals, meas))
    pc = decreasing_rearrangement((vals + c, meas))
    bps = np.unique(np.concatenate([pu.breakpoints, pc.breakpoints]))
    mid = 0.5 * (bps[1:] + bps[:-1])[np.diff(bps) > 1e-9]
    np.testing.assert_allclose(pc(mid), pu(mid) + c, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(cells(2, 20), st.data())
def test_order_contraction_hardy_littlewood(data, draw):
    u, meas = np.array(data[0]), np.array(data[1])
    v = np.array(draw.draw(st.lists(st.floats(-10, 10), min_size=len(u), max_size=len(u))))
    pu, pv = decreasing_rearrangement((u, meas)), decreasing_rearrangement((v, meas))
    for p in (1, 2):
        assert profile_distance(pu, pv, p) <= np.sum(np.abs(u - v) ** p * meas) ** (1 / p) + 1e-12
    assert hardy_littlewood_gap((u, meas), (v, meas)) >= -1e-12
    w = np.abs(u) + np.abs(v)  # |u| ≤ w cellwise
    pw = decreasing_rearrangement((w, meas))
    bps = np.unique(np.concatenate([pu.breakpoints, pw.breakpoints]))
    mid = 0.5 * (bps[1:] + bps[:-1])[np.diff(bps) > 1e-9]  # skip roundoff slivers
    assert np.all(pu(mid) <= pw(mid))
