import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mixsing.errors import InvalidInput
from mixsing.grid import Domain, build_grid
from mixsing.operators import (MAX_DENSE_NODES, assemble_local, bilinear_form, build_operator,
                               fit_embedding_constant, tail_kappa)


def tent_energy_oracle(s):
    """∫∫ (u(x)−u(y))² / |x−y|^{1+2s} for u = (1−|x|)⁺.

    With D(z) = ∫(u(x+z) − u(x))² dx = 2(2/3 − R(z)) and R the (piecewise
    cubic) autocorrelation of the tent, the energy is 2∫_0^∞ z^{−1−2s} D(z) dz.
    """
    # 2/3 − R(z), written without cancellation near z = 0
    gap = lambda z: z * z - z**3 / 2 if z <= 1 else 2 / 3 - (2 - z) ** 3 / 6
    f = lambda z: z ** (-1 - 2 * s) * 2 * gap(z)
    far = (4 / 3) * 2 ** (-2 * s) / (2 * s)
    return 2 * (quad(f, 0, 1, epsabs=0, epsrel=1e-13)[0] + quad(f, 1, 2, epsabs=0, epsrel=1e-13)[0] + far)


def polar_kappa(dom, x, y, s):
    """κ from ray lengths: ∫_0^{2π} R(φ)^{−2s} / (2s) dφ."""
    ax, bx, ay, by = dom.bounds

    def R(phi):
        c, d = math.cos(phi), math.sin(phi)
        ts = []
        if c > 0: ts.append((bx - x) / c)
        if c < 0: ts.append((ax - x) / c)
        if d > 0: ts.append((by - y) / d)
        if d < 0: ts.append((ay - y) / d)
        return min(ts)
    val = quad(lambda p: R(p) ** (-2 * s), 0, 2 * math.pi, limit=400, points=[
        math.atan2(by - y, bx - x) % (2 * math.pi), math.atan2(by - y, ax - x) % (2 * math.pi),
        math.atan2(ay - y, ax - x) % (2 * math.pi), math.atan2(ay - y, bx - x) % (2 * math.pi)])[0]
    return val / (2 * s)


@pytest.fixture(scope="module")
def tent_grid():
    return build_grid(Domain.interval(-1, 1), 8)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_tent_energy_matches_oracle(tent_grid, s):
    u = 1 - np.abs(tent_grid.interior_nodes[:, 0])
    op = build_operator(tent_grid, s)
    assert op.fractional_energy(u) == pytest.approx(tent_energy_oracle(s), rel=1e-7)
    assert op.local_energy(u) == pytest.approx(2.0, rel=1e-13)


@pytest.mark.parametrize("s,ref", [(0.25, 5.2320408), (0.75, 12.371562)])
def test_2d_hat_energy(s, ref):
    # single-node Q1 hat at the centre of (−1,1)², N = 4; reference values from the
    # two-dimensional Fourier integral 2A(2π)^{−2}∫|ξ|^{2s}|û|² (adaptive quadrature)
    g = build_grid(Domain.rectangle(-1, 1, -1, 1), 4)
    u = (np.abs(g.interior_nodes).sum(axis=1) == 0).astype(float)
    assert build_operator(g, s).fractional_energy(u) == pytest.approx(ref, rel=1e-5)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.9])
def test_kappa_1d(s):
    d = Domain.interval(-1, 1)
    assert tail_kappa(d, s, [[0.0]])[0] == pytest.approx(1 / s, rel=1e-12)
    x = 0.3
    assert tail_kappa(d, s, [[x]])[0] == pytest.approx(((1 + x) ** (-2 * s) + (1 - x) ** (-2 * s)) / (2 * s))


@pytest.mark.parametrize("pt,s", [((0.0, 0.0), 0.5), ((0.3, -0.6), 0.25), ((1.7, 0.1), 0.75)])
def test_kappa_2d_polar(pt, s):
    d = Domain.rectangle(-1, 2, -1, 1)
    assert tail_kappa(d, s, [pt])[0] == pytest.approx(polar_kappa(d, *pt, s), rel=1e-9)


@pytest.mark.parametrize("dom", [Domain.interval(-1, 1), Domain.rectangle(0, 1, 0, 2)])
def test_symmetry_and_definiteness(dom):
    g = build_grid(dom, 8)
    op = build_operator(g, 0.4)
    A = op.A_loc.toarray()
    assert np.array_equal(A, A.T)
    assert np.array_equal(op.A_frac, op.A_frac.T)
    assert np.all(np.linalg.eigvalsh(op.A_frac) > 0)
    assert np.all(np.linalg.eigvalsh(op.dense) > 0)


def test_local_stiffness_1d():
    g = build_grid(Domain.interval(0, 1), 4)
    A = assemble_local(g).toarray()
    np.testing.assert_allclose(A, 4 * (2 * np.eye(3) - np.eye(3, k=1) - np.eye(3, k=-1)))


def test_local_energy_2d_bilinear():
    # Dirichlet energy of the Q1 interpolant of x(1−x)y(1−y) tends to 1/45 at rate h²
    errs = []
    for N in (16, 32):
        g = build_grid(Domain.rectangle(0, 1, 0, 1), N)
        x, y = g.interior_nodes.T
        u = x * (1 - x) * y * (1 - y)
        errs.append(abs(assemble_local(g) @ u @ u - 1 / 45))
    assert 3.8 < errs[0] / errs[1] < 4.2


def test_errors():
    g = build_grid(Domain.interval(-1, 1), 4)
    for s in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InvalidInput) as e:
            build_operator(g, s)
        assert e.value.code == "invalid-order"
    big = build_grid(Domain.rectangle(0, 1, 0, 1), int(math.isqrt(MAX_DENSE_NODES)) + 2)
    with pytest.raises(InvalidInput) as e:
        build_operator(big, 0.5)
    assert e.value.code == "too-large"


def test_hooks_and_dump(tmp_path):
    g = build_grid(Domain.interval(-1, 1), 6)
    op = build_operator(g, 0.5)
    bad = op.with_fault("sign-flip")
    assert not np.array_equal(bad.A_frac, bad.A_frac.T)
    assert np.array_equal(op.A_frac, op.A_frac.T)
    assert not op.without_fractional().A_frac.any()
    op.dump(tmp_path)
    assert (tmp_path / "A_loc.csv").read_text().startswith("row,col,value\n")
    assert len((tmp_path / "tail.csv").read_text().splitlines()) == g.size + 1


def test_embedding_constant():
    g = build_grid(Domain.interval(-1, 1), 16)
    op = build_operator(g, 0.5)
    x = g.interior_nodes[:, 0]
    samples = [np.cos(np.pi * x / 2), np.sin(np.pi * x), 1 - np.abs(x)]
    beta = fit_embedding_constant(op, samples=samples)
    assert beta > 0
    for u in samples:
        assert op.fractional_energy(u) <= beta * op.local_energy(u) * (1 + 1e-14)
    with pytest.raises(InvalidInput):
        fit_embedding_constant(op, samples=[np.zeros(g.size)])
    with pytest.raises(InvalidInput):
        fit_embedding_constant(op)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_bilinear_form_properties(u, v):
    op = _op10()
    u, v = np.array(u), np.array(v)
    assert bilinear_form(op, u, v) == pytest.approx(bilinear_form(op, v, u), rel=1e-12, abs=1e-9)
    assert bilinear_form(op, u, u) >= op.local_energy(u) - 1e-9 * (1 + op.local_energy(u))


_CACHE = {}


def _op10():
    if "op" not in _CACHE:
        _CACHE["op"] = build_operator(build_grid(Domain.interval(-1, 1), 10), 0.6)
    return _CACHE["op"]


def test_runtime_n256():
    t0 = time.perf_counter()
    op = build_operator(build_grid(Domain.interval(-1, 1), 256), 0.5)
    assert time.perf_counter() - t0 < 30
    assert np.array_equal(op.A_frac, op.A_frac.T)
