"""Small invariant suites for every module, run by ``mixsing selftest``."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as Gamma

from .grid import Domain, GridFunction, build_grid
from .operators import build_operator, tail_kappa
from .problem import (G_k, NonlinearitySpec, ProblemSpec, SourceSpec, T_k, build_truncated_data,
                      classify_regime)
from .rearrange import (decreasing_rearrangement, distribution_function, hardy_littlewood_gap,
                        profile_distance, profile_lp_norm)
from .solver import solve_limit, solve_truncated
from .talenti import bliss_constant, comparison_profile, summability_bounds

# energies of the tent 1 − |x| from the Fourier representation of the kernel, N = 8 on (−1, 1)
TENT_ENERGY = {0.25: 7.06924480, 0.5: 5.54517744, 0.75: 8.33118489}


def _grid_suite(fault):
    g = build_grid(Domain.interval(-1, 1), 4)
    r = build_grid(Domain.rectangle(0, 1, 0, 1), 3)
    return [
        ("interval nodes", np.allclose(g.interior_nodes[:, 0], [-0.5, 0, 0.5])),
        ("rectangle count", r.size == 4 and math.isclose(r.cell_measure, 1 / 9)),
        ("measure bound", g.cell_measure * g.size <= g.domain.volume),
    ]


def _operator_suite(fault):
    out = []
    g = build_grid(Domain.interval(-1, 1), 16)
    op = build_operator(g, 0.5)
    if fault:
        op = op.with_fault(fault)
    A = op.A_loc.toarray()
    out.append(("A_loc symmetric", np.array_equal(A, A.T)))
    out.append(("A_frac symmetric", np.array_equal(op.A_frac, op.A_frac.T)))
    out.append(("positive definite", bool(np.all(np.linalg.eigvalsh(op.dense) > 0))))
    g8 = build_grid(Domain.interval(-1, 1), 8)
    tent = 1 - np.abs(g8.interior_nodes[:, 0])
    for s, ref in TENT_ENERGY.items():
        e = build_operator(g8, s).fractional_energy(tent)
        out.append((f"tent energy s={s}", abs(e - ref) <= 1e-6 * ref))
    out.append(("kappa(0) = 1/s", abs(tail_kappa(g.domain, 0.3, np.array([[0.0]]))[0] - 1 / 0.3) < 1e-10))
    r = build_grid(Domain.rectangle(-1, 1, -1, 1), 4)
    op2 = build_operator(r, 0.5)
    out.append(("2D symmetric", np.array_equal(op2.A_frac, op2.A_frac.T)))
    return out


def _problem_suite(fault):
    rep = classify_regime(0.5, 2, 5)
    s = np.linspace(-3, 3, 61)
    return [
        ("regime example", rep.q_threshold == 0 and math.isclose(rep.m_threshold, 10 / 6.5)
         and rep.p_exponent == 15),
        ("gamma = 1 convention", classify_regime(1.0, 2, 3).q_threshold == -1),
        ("T_k + G_k = id", np.allclose(T_k(1.3, s) + G_k(1.3, s), s, rtol=0, atol=1e-15)),
    ]


def _solver_suite(fault):
    D = Domain.interval(-1, 1)
    g = build_grid(D, 32)
    op = build_operator(g, 0.25)
    spec = ProblemSpec(D, 0.25, NonlinearitySpec(0.5, 2.0),
                       SourceSpec("polynomial", {"coefficients": [1, 0, 1]}),
                       levels=(1, 2, 4, 8))
    U, lim = solve_limit(op, spec)
    zero = ProblemSpec(D, 0.25, NonlinearitySpec(0.5, 2.0), SourceSpec("constant", {"value": 0.0}))
    Z, zrep = solve_limit(op, zero)
    lin = ProblemSpec(D, 0.25, NonlinearitySpec(0.0, 1.0, absorption_off=True), SourceSpec())
    d1 = build_truncated_data(lin, 1e6, 10, g)
    u1, _ = solve_truncated(op, d1)
    d2 = build_truncated_data(lin, 1e6, 10, g, GridFunction(g, 2.5 * d1.f_n.values))
    u2, _ = solve_truncated(op, d2)
    return [
        ("positivity", U.values.min() > 0),
        ("monotone levels", lim.monotonicity_violation <= 1e-8),
        ("residual", max(r.final_residual_maxnorm for r in lim.reports) <= 1e-10),
        ("a-priori bound", all(r.apriori_satisfied for r in lim.reports)),
        ("zero source", Z.max_abs() == 0 and zrep.converged),
        ("linearity", np.allclose(u2.values, 2.5 * u1.values, rtol=1e-10, atol=0)),
    ]


def _rearrange_suite(fault):
    rng = np.random.default_rng(7)
    ok_eq = ok_norm = ok_hl = ok_con = True
    for _ in range(50):
        u = (rng.standard_normal(20), rng.uniform(0.01, 0.1, 20))
        v = (rng.standard_normal(20), u[1])
        pu, pv = decreasing_rearrangement(u), decreasing_rearrangement(v)
        a, b = distribution_function(u), distribution_function(pu)
        ok_eq &= a.equals(b, atol=1e-12)
        for p in (1, 2):
            exact = np.sum(np.abs(u[0]) ** p * u[1]) ** (1 / p)
            ok_norm &= abs(profile_lp_norm(pu, p) - exact) <= 1e-12 * max(1, exact)
            ok_con &= profile_distance(pu, pv, p) <= np.sum(np.abs(u[0] - v[0]) ** p * u[1]) ** (1 / p) + 1e-12
        ok_hl &= hardy_littlewood_gap(u, v) >= -1e-12
    return [("equimeasurability", ok_eq), ("norms", ok_norm), ("Hardy-Littlewood", ok_hl),
            ("contraction", ok_con)]


def _talenti_suite(fault):
    from .rearrange import RearrangedProfile
    v = comparison_profile(RearrangedProfile([0.0, 2.0], [1.0], 2.0), 1)
    t = v.breakpoints
    ref = 5**5 * (Gamma(2.5) / (Gamma(1.25) * Gamma(2.25))) ** 4
    return [
        ("v* oracle", np.max(np.abs(v.exact(t) - (4 - t**2) / 8)) <= 1e-10),
        ("Bliss n=5 m=2", math.isclose(bliss_constant(5, 2), ref, rel_tol=1e-12)),
        ("case ii value", abs(summability_bounds(1, 2, 1, 2, 1).rhs_value - 1.27790) < 1e-4),
    ]


SUITES = [("grid", _grid_suite), ("operators", _operator_suite), ("problem", _problem_suite),
          ("solver", _solver_suite), ("rearrange", _rearrange_suite), ("talenti", _talenti_suite)]


def selftest(fault=None, echo=print):
    """Run all suites; returns (passed, total, failures)."""
    passed = total = 0
    failures = []
    for name, suite in SUITES:
        try:
            results = suite(fault)
        except Exception as exc:  # a crashing suite counts as one failure
            results = [(f"crashed: {type(exc).__name__}: {exc}", False)]
        ok = sum(bool(r) for _, r in results)
        passed += ok
        total += len(results)
        echo(f"{name:10s} {ok}/{len(results)}")
        for check, r in results:
            if not r:
                failures.append(f"{name}: {check}")
                echo(f"  FAIL {check}")
    echo(f"total      {passed}/{total}")
    return passed, total, failures
