"""Newton solver for the truncated problems and the double limit k → ∞, n → ∞."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import MonotonicityViolation, NonConvergence, SchemeFidelityError
from .grid import GridFunction
from .operators import DiscreteMixedOperator
from .problem import ProblemSpec, T_k, TruncatedData, S_delta_k, build_truncated_data

DERIV_CAP = 1e12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_newton: int = 50
    max_picard: int = 500
    armijo_c: float = 1e-4
    min_step: float = 2.0**-12
    max_failed_searches: int = 3


@dataclass
class SolveReport:
    newton_iterations: int = 0
    final_residual_maxnorm: float = 0.0
    energy_rho_sq: float = 0.0
    absorption_mass: float = 0.0
    apriori_constant: Optional[float] = None
    apriori_satisfied: Optional[bool] = None
    min_value: float = 0.0
    max_value: float = 0.0
    clamp_count: int = 0
    picard_steps: int = 0
    failed_line_searches: int = 0
    n_level: Optional[float] = None
    k_level: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class LimitReport:
    n_levels: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    successive_sup_diffs: list = field(default_factory=list)
    monotonicity_violation: float = 0.0
    converged: bool = False
    final_k: float = 0.0

    def to_dict(self):
        return {
            "n_levels": list(self.n_levels),
            "reports": [r.to_dict() for r in self.reports],
            "successive_sup_diffs": list(self.successive_sup_diffs),
            "monotonicity_violation": self.monotonicity_violation,
            "converged": self.converged,
            "final_k": self.final_k,
        }


def _residual(A, m, U, data: TruncatedData, f):
    return A @ U + m * (data.g_k(U) - data.h_reg(U) * f)


def solve_truncated(op: DiscreteMixedOperator, data: TruncatedData, opts: SolverOptions = None,
                    start=None, *, custom=False):
    """Solve (A_loc + A_frac)U + M(g_k(U) − h_reg(U) f_n) = 0 for U ≥ 0.

    Damped Newton with Cholesky solves; after ``max_failed_searches`` failed
    Armijo searches the remaining iterations use the frozen-coefficient
    (Picard) map. Raises :class:`NonConvergence` with the report attached.
    """
    opts = opts or SolverOptions()
    A = op.dense
    m = op.lumped_mass
    f = data.f_n.values
    U = np.zeros(op.grid.size) if start is None else np.maximum(np.array(_vals(start), dtype=float), 0.0)
    rep = SolveReport(n_level=data.n_level, k_level=data.k_level)
    r = _residual(A, m, U, data, f)
    picard = False
    converged = False
    for it in range(opts.max_newton + 1):
        rep.newton_iterations = it + 1
        if np.max(np.abs(r), initial=0.0) <= opts.tol:
            converged = True
            break
        if it == opts.max_newton:
            break
        if picard:
            break
        d = np.minimum(data.g_k.derivative(U), DERIV_CAP) - data.h_reg.derivative(U) * f
        J = A + m * np.diag(d)
        try:
            cf = cho_factor(J)
        except LinAlgError:
            exc = MonotonicityViolation if custom else SchemeFidelityError
            raise exc("Newton Jacobian is not positive definite", report=rep)
        delta = cho_solve(cf, -r)
        norm0 = np.linalg.norm(r)
        t = 1.0
        while True:
            trial = U + t * delta
            clamped = trial < 0
            trial = np.where(clamped, 0.0, trial)
            r_new = _residual(A, m, trial, data, f)
            if np.linalg.norm(r_new) <= (1 - opts.armijo_c * t) * norm0 or t <= opts.min_step:
                break
            t *= 0.5
        if np.linalg.norm(r_new) > (1 - opts.armijo_c * t) * norm0:
            rep.failed_line_searches += 1
            if rep.failed_line_searches >= opts.max_failed_searches:
                picard = True
        rep.clamp_count += int(np.count_nonzero(clamped))
        U, r = trial, r_new
    if not converged and picard:
        U, r, converged = _picard(A, m, U, data, f, opts, rep)
    rep.final_residual_maxnorm = float(np.max(np.abs(r), initial=0.0))
    rep.min_value = float(U.min(initial=0.0))
    rep.max_value = float(U.max(initial=0.0))
    rep.energy_rho_sq = float(U @ (A @ U))
    rep.absorption_mass = float(np.sum(data.g_k(U) * U) * m)
    if not converged:
        raise NonConvergence(
            f"no convergence: residual {rep.final_residual_maxnorm:.3e} > {opts.tol:g}", report=rep)
    return GridFunction(op.grid, U), rep


def _picard(A, m, U, data, f, opts, rep):
    for _ in range(opts.max_picard):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(U > 0, data.g_k(U) / U, 0.0)
        cf = cho_factor(A + m * np.diag(ratio))
        U_new = cho_solve(cf, m * data.h_reg(U) * f)
        rep.clamp_count += int(np.count_nonzero(U_new < 0))
        U = np.maximum(U_new, 0.0)
        rep.picard_steps += 1
        r = _residual(A, m, U, data, f)
        if np.max(np.abs(r), initial=0.0) <= opts.tol:
            return U, r, True
    return U, r, False


def _vals(u):
    return u.values if isinstance(u, GridFunction) else u


# ---------------------------------------------------------------------------
# energy bound
# ---------------------------------------------------------------------------

def apriori_constant(nl, m, f_l1, f_lm, volume):
    """Uniform energy constant C with ρ(u_n)² + ‖g(u_n)u_n‖₁ ≤ 3C.

    Returns ``(C, breakdown)``.
    """
    gam, th = nl.gamma, nl.theta_eff
    s_lo, s_up = nl.s_low, max(nl.s_up, nl.s1)
    ss = np.linspace(s_lo, s_up, 2001)
    h = nl.singular()
    max_hs = float(np.max(h(ss) * ss))
    base = (nl.C_low * s_lo ** (1 - gam) + max_hs + nl.C_up * s_up ** (1 - th)) * f_l1
    out = {"base": base, "max_hs": max_hs, "s_up_eff": s_up}
    C = base
    if th < 1:
        eps = nl.nu / 2
        mp = m / (m - 1)
        C_eps = nl.C_up**m * (eps * mp) ** (-(m - 1)) / m
        young = C_eps * f_lm**m
        out.update(epsilon=eps, C_eps=young / f_lm**m if f_lm else C_eps, young_term=young)
        C += young
        a = (1 - th) * m / (m - 1)
        if nl.q + 1 > a + 1e-14:
            extra = eps * (1 - a / (nl.q + 1)) * volume
            out["volume_term"] = extra
            C += extra
    out["C"] = C
    return C, out


def energy_diagnostics(op: DiscreteMixedOperator, U, spec: ProblemSpec, f_samples=None):
    """ρ_h(U)², absorption mass and the a-priori check ρ² + ‖g(U)U‖₁ ≤ 3C."""
    u = _vals(U)
    mu = op.lumped_mass
    f = spec.f.sample(op.grid) if f_samples is None else f_samples
    fv = f.values
    rho = float(u @ op.apply(u))
    g = spec.nonlinearity.absorption()
    mass = float(np.sum(g(u) * u) * mu)
    f_l1 = float(np.sum(fv) * mu)
    f_lm = float((np.sum(fv**spec.m) * mu) ** (1 / spec.m))
    C, breakdown = apriori_constant(spec.nonlinearity, spec.m, f_l1, f_lm, spec.domain.volume)
    return {
        "energy_rho_sq": rho,
        "absorption_mass": mass,
        "apriori_constant": C,
        "apriori_satisfied": bool(rho + mass <= 3 * C),
        "apriori_breakdown": breakdown,
    }


# ---------------------------------------------------------------------------
# double limit
# ---------------------------------------------------------------------------

def solve_limit(op: DiscreteMixedOperator, spec: ProblemSpec, start=None, opts: SolverOptions = None,
                f_samples=None):
    """Run the regularisation schedule with adaptively inactive truncation."""
    opts = opts or SolverOptions(tol=spec.tol_newton, max_newton=spec.max_newton)
    f = spec.f.sample(op.grid) if f_samples is None else f_samples
    custom = spec.nonlinearity.mode == "custom"
    g = spec.nonlinearity.absorption()
    report = LimitReport()
    U_prev = None
    U = start
    k = spec.k_start
    for n_level in spec.levels:
        for _ in range(64):
            data = build_truncated_data(spec, n_level, k, op.grid, f)
            sol, rep = solve_truncated(op, data, opts, start=U, custom=custom)
            if np.max(g(sol.values), initial=0.0) < k / 2:
                break
            U = sol
            k *= 2
        else:
            raise NonConvergence("absorption truncation never became inactive", report=rep)
        U = sol
        diag = energy_diagnostics(op, sol, spec, f)
        for key in ("energy_rho_sq", "absorption_mass", "apriori_constant", "apriori_satisfied"):
            setattr(rep, key, diag[key])
        report.n_levels.append(n_level)
        report.reports.append(rep)
        report.final_k = k
        if U_prev is not None:
            diff = sol.values - U_prev.values
            report.successive_sup_diffs.append(float(np.max(np.abs(diff), initial=0.0)))
            report.monotonicity_violation = max(report.monotonicity_violation,
                                                float(np.max(-diff, initial=0.0)))
            if report.successive_sup_diffs[-1] <= spec.tol_levels:
                report.converged = True
                break
        U_prev = sol
    if not custom and report.monotonicity_violation > 1e-6:
        raise SchemeFidelityError(
            f"regularised solutions decrease by {report.monotonicity_violation:.3e}", report=report)
    return U, report


def uniqueness_identity(U1, U2, g, mu, ks=(0.1, 1.0, 10.0)):
    """min over k of Σ (g(U₁) − g(U₂)) T_k(U₁ − U₂) μ."""
    a, b = _vals(U1), _vals(U2)
    return min(float(np.sum((g(a) - g(b)) * T_k(k, a - b)) * mu) for k in ks)


def uniqueness_probe(op: DiscreteMixedOperator, spec: ProblemSpec, starts, opts=None):
    """Largest pairwise sup-distance between limits computed from different starts."""
    f = spec.f.sample(op.grid)
    sols = [solve_limit(op, spec, start=s, opts=opts, f_samples=f)[0].values for s in starts]
    g = spec.nonlinearity.absorption()
    worst = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            worst = max(worst, float(np.max(np.abs(sols[i] - sols[j]), initial=0.0)))
            ident = uniqueness_identity(sols[i], sols[j], g, op.lumped_mass)
            if ident < -1e-10:
                raise SchemeFidelityError(f"uniqueness identity negative ({ident:.3e})")
    return worst


def equiintegrability_check(op: DiscreteMixedOperator, U, spec: ProblemSpec, eta, k, n_level=None):
    """RHS − LHS of the S_{η,k} energy inequality (nonlocal term dropped).

    The gradient term is Uᵀ A_loc S(U): the exact energy of the interpolants,
    which on every edge weights |∇U|² by the secant slope of S.
    """
    u = _vals(U)
    mu = op.lumped_mass
    S = S_delta_k(eta, k, u)
    if not np.any(S):
        return 0.0
    f = spec.f.sample(op.grid).values
    if n_level is not None:
        f = np.minimum(f, n_level)
    g = spec.nonlinearity.absorption()
    lhs = float(u @ (op.A_loc @ S)) + float(np.sum(g(u) * S) * mu)
    h = spec.nonlinearity.singular()
    ss = k * np.logspace(0, 8, 400)
    with np.errstate(divide="ignore"):
        sup_h = float(np.max(h(ss)))
    rhs = sup_h * float(np.sum(f * S) * mu)
    return rhs - lhs
