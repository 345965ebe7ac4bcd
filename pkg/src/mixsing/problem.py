"""Nonlinearities, source data, standing-assumption checks and regime classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .errors import HypothesisViolation, InvalidInput
from .grid import Domain, Grid, GridFunction, build_grid, sample_function


# ---------------------------------------------------------------------------
# truncations
# ---------------------------------------------------------------------------

def T_k(k, s):
    """max(-k, min(s, k))"""
    return np.clip(s, -k, k)


def G_k(k, s):
    """(|s| - k)^+ sign(s); T_k + G_k is the identity."""
    s = np.asarray(s, dtype=float)
    return np.maximum(np.abs(s) - k, 0.0) * np.sign(s)


def S_delta_k(delta, k, s):
    """0 for s ≤ k, 1 for s ≥ k + δ, linear in between."""
    s = np.asarray(s, dtype=float)
    return np.where(s <= k, 0.0, np.where(s >= k + delta, 1.0, np.clip((s - k) / delta, 0.0, 1.0)))


def V_delta_k(delta, k, s):
    return 1.0 - S_delta_k(delta, k, s)


def G_t_h(t, h, theta):
    """Level-set test function: 0 below t, θ - t on (t, t+h], h above."""
    theta = np.asarray(theta, dtype=float)
    return np.clip(theta - t, 0.0, h)


# ---------------------------------------------------------------------------
# scalar maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarMap:
    """A scalar function on [0, ∞) with its derivative, both vectorised."""
    func: Callable
    deriv: Callable
    name: str = ""

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.deriv(np.asarray(t, dtype=float))


def power_absorption(q, coef=1.0):
    def f(t):
        tp = np.maximum(t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = coef * np.where(tp > 0, tp**q, 0.0)
        return out

    def df(t):
        tp = np.maximum(t, 0.0)
        if q == 0:
            return np.zeros_like(tp)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(tp > 0, coef * q * tp ** (q - 1), 0.0 if q > 1 else (coef if q == 1 else 1e300))
        return np.where(t >= 0, out, 0.0)

    return ScalarMap(f, df, f"{coef:g}*t^{q:g}")


def zero_map():
    return ScalarMap(lambda t: np.zeros_like(t), lambda t: np.zeros_like(t), "0")


def power_singular(gamma, coef=1.0):
    def f(t):
        with np.errstate(divide="ignore"):
            return coef * np.asarray(t, dtype=float) ** (-gamma) if gamma else coef * np.ones_like(t)

    def df(t):
        with np.errstate(divide="ignore"):
            return -gamma * coef * np.asarray(t, dtype=float) ** (-gamma - 1) if gamma else np.zeros_like(t)

    return ScalarMap(f, df, f"{coef:g}*t^-{gamma:g}")


def shifted_power(gamma, shift, coef=1.0):
    return ScalarMap(lambda t: coef * (t + shift) ** (-gamma),
                     lambda t: -gamma * coef * (t + shift) ** (-gamma - 1),
                     f"{coef:g}*(t+{shift:g})^-{gamma:g}")


def exponential_decay(rate=1.0, coef=1.0):
    return ScalarMap(lambda t: coef * np.exp(-rate * t), lambda t: -rate * coef * np.exp(-rate * t),
                     f"{coef:g}*exp(-{rate:g}t)")


def map_from_dict(d, role):
    kind = d.get("kind", "power")
    if role == "g":
        if kind == "power":
            return power_absorption(float(d["exponent"]), float(d.get("coef", 1.0)))
        if kind == "zero":
            return zero_map()
    else:
        if kind == "power":
            return power_singular(float(d["exponent"]), float(d.get("coef", 1.0)))
        if kind == "shifted_power":
            return shifted_power(float(d["exponent"]), float(d["shift"]), float(d.get("coef", 1.0)))
        if kind == "exponential":
            return exponential_decay(float(d.get("rate", 1.0)), float(d.get("coef", 1.0)))
    raise InvalidInput(f"unknown {role} descriptor {kind!r}", code="invalid-config")


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearitySpec:
    gamma: float
    q: float
    theta: Optional[float] = None
    mode: str = "model"
    g: Optional[ScalarMap] = None
    h: Optional[ScalarMap] = None
    g_nondecreasing: bool = True
    h_nonincreasing: bool = True
    singular_at_zero: Optional[bool] = None
    C_low: float = 1.0
    C_up: float = 1.0
    s_low: float = 0.5
    s_up: float = 1.0
    nu: float = 1.0
    s1: float = 1.0
    absorption_off: bool = False  # test hook: g ≡ 0
    descriptors: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("model", "custom"):
            raise InvalidInput(f"unknown mode {self.mode!r}", code="invalid-config")
        if self.mode == "custom":
            if self.g is None or self.h is None:
                raise InvalidInput("custom mode needs g and h", code="invalid-config")
            if self.singular_at_zero is None:
                raise InvalidInput("custom h must declare singular_at_zero", code="invalid-config")
            if self.theta is None:
                raise InvalidInput("custom mode needs an explicit theta", code="invalid-config")

    @property
    def theta_eff(self):
        return self.gamma if self.theta is None else self.theta

    def absorption(self):
        if self.absorption_off:
            return zero_map()
        return power_absorption(self.q) if self.mode == "model" else self.g

    def singular(self):
        return power_singular(self.gamma) if self.mode == "model" else self.h

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k not in ("g", "h", "descriptors")}
        out.update(self.descriptors)
        return out


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "constant"
    params: dict = field(default_factory=dict)

    def callable(self, n):
        p = self.params
        if self.kind == "constant":
            c = float(p.get("value", 1.0))
            return lambda *x: np.full_like(x[0], c, dtype=float)
        if self.kind == "polynomial":
            if "terms" in p:
                terms = [tuple(t) for t in p["terms"]]
            else:
                terms = [(c, k) + (0,) * (n - 1) for k, c in enumerate(p.get("coefficients", [1.0]))]

            def poly(*x):
                out = np.zeros_like(x[0], dtype=float)
                for coef, *pw in terms:
                    term = np.full_like(out, float(coef))
                    for xi, e in zip(x, pw):
                        term = term * xi ** e
                    out = out + term
                return out
            return poly
        if self.kind == "gaussian":
            A = float(p.get("amplitude", 1.0))
            w = float(p.get("width", 0.25))
            c = np.asarray(p.get("center", [0.0] * n), dtype=float)
            return lambda *x: A * np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / (2 * w * w))
        if self.kind == "radial_power":
            A = float(p.get("amplitude", 1.0))
            a = float(p.get("exponent", 0.5))
            c = np.asarray(p.get("center", [0.0] * n), dtype=float)

            def rp(*x):
                r = np.sqrt(sum((xi - ci) ** 2 for xi, ci in zip(x, c)))
                with np.errstate(divide="ignore"):
                    return A * r ** (-a)
            return rp
        raise InvalidInput(f"unknown source kind {self.kind!r}", code="invalid-config")

    def sample(self, grid: Grid, nonnegative=True) -> GridFunction:
        if self.kind == "samples":
            vals = self.params.get("values")
            if vals is None:
                return GridFunction.from_csv(grid, self.params["path"])
            gf = GridFunction(grid, vals)
            if nonnegative and np.any(gf.values < 0):
                raise HypothesisViolation("sampled source has negative entries")
            return gf
        return sample_function(grid, self.callable(grid.n), nonnegative=nonnegative)

    def in_Lm(self, m, n):
        """Whether the preset is m-integrable on a bounded domain (None if unknown)."""
        if self.kind in ("constant", "polynomial", "gaussian", "samples"):
            return True
        if self.kind == "radial_power":
            a = float(self.params.get("exponent", 0.5))
            return a <= 0 or a * m < n
        return None

    def is_zero(self):
        if self.kind == "constant":
            return float(self.params.get("value", 1.0)) == 0.0
        if self.kind == "polynomial":
            terms = self.params.get("terms") or [(c,) for c in self.params.get("coefficients", [1.0])]
            return all(float(t[0]) == 0.0 for t in terms)
        if self.kind in ("gaussian", "radial_power"):
            return float(self.params.get("amplitude", 1.0)) == 0.0
        if self.kind == "samples" and self.params.get("values") is not None:
            return not np.any(np.asarray(self.params["values"], dtype=float))
        return False

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "constant")
        return cls(kind, d)


DEFAULT_LEVELS = tuple(2**j for j in range(11))


@dataclass(frozen=True)
class ProblemSpec:
    domain: Domain
    s: float
    nonlinearity: NonlinearitySpec
    f: SourceSpec
    m: float = 2.0
    levels: tuple = DEFAULT_LEVELS
    k_start: float = 10.0
    h_form: Optional[str] = None  # "shifted" (model default) or "truncation"
    tol_newton: float = 1e-10
    tol_levels: float = 1e-8
    max_newton: int = 50

    def __post_init__(self):
        if self.h_form is None:
            object.__setattr__(self, "h_form",
                               "shifted" if self.nonlinearity.mode == "model" else "truncation")
        if not 0 < self.s < 1:
            raise InvalidInput(f"s must lie in (0,1), got {self.s}", code="invalid-order")
        if self.h_form not in ("shifted", "truncation"):
            raise InvalidInput(f"unknown h_form {self.h_form!r}", code="invalid-config")
        if self.h_form == "shifted" and self.nonlinearity.mode != "model":
            raise InvalidInput("the shifted regularisation needs model-mode h", code="invalid-config")
        for name in ("tol_newton", "tol_levels", "k_start"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive", code="invalid-config")


# ---------------------------------------------------------------------------
# truncated data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedData:
    f_n: GridFunction
    g_k: ScalarMap
    h_reg: ScalarMap
    n_level: float
    k_level: float


def truncate_absorption(g: ScalarMap, k) -> ScalarMap:
    def f(t):
        return np.where(t >= 0, np.minimum(g(np.maximum(t, 0.0)), k), 0.0)

    def df(t):
        tp = np.maximum(t, 0.0)
        return np.where((t >= 0) & (g(tp) < k), g.derivative(tp), 0.0)

    return ScalarMap(f, df, f"min({g.name},{k:g})")


def regularize_singular(spec: ProblemSpec, n_level) -> ScalarMap:
    nl = spec.nonlinearity
    if spec.h_form == "shifted":
        gam, eps = nl.gamma, 1.0 / n_level
        return ScalarMap(lambda t: (np.maximum(t, 0.0) + eps) ** (-gam),
                         lambda t: np.where(t >= 0, -gam * (np.maximum(t, 0.0) + eps) ** (-gam - 1), 0.0),
                         f"(t+1/{n_level:g})^-{gam:g}")
    h = nl.singular()

    def f(t):
        tp = np.maximum(t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = h(tp)
        return np.minimum(np.where(np.isnan(v), np.inf, v), n_level)

    def df(t):
        tp = np.maximum(t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = h(tp)
            d = h.derivative(tp)
        return np.where((t > 0) & (v < n_level), d, 0.0)

    return ScalarMap(f, df, f"T_{n_level:g}(h)")


def build_truncated_data(spec: ProblemSpec, n_level, k_level, grid: Grid, f_samples=None) -> TruncatedData:
    f = spec.f.sample(grid) if f_samples is None else f_samples
    f_n = GridFunction(grid, np.minimum(f.values, n_level))
    g_k = truncate_absorption(spec.nonlinearity.absorption(), k_level)
    return TruncatedData(f_n, g_k, regularize_singular(spec, n_level), n_level, k_level)


# ---------------------------------------------------------------------------
# hypothesis validation
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    status: str  # pass | fail | sampled-pass | waived | n/a
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.status != "fail" for c in self.checks)

    def failures(self):
        return [c for c in self.checks if c.status == "fail"]

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


LOG_GRID = np.logspace(-8, 8, 400)


def _monotone(v, sign):
    """Sampled monotonicity with relative slack; infinite samples compare exactly."""
    slack = 1e-12 * np.abs(np.where(np.isfinite(v), v, 0.0))
    a, b = sign * v[:-1], sign * v[1:]
    return bool(np.all(b >= a - slack[:-1]))


def _sampled(ok, what):
    return Check(what, "sampled-pass" if ok else "fail",
                 "sampled on 400 log-spaced points" if ok else "counterexample on sampling grid")


def validate_hypotheses(spec: ProblemSpec, grid: Optional[Grid] = None) -> ValidationReport:
    nl = spec.nonlinearity
    gam, th, q, m = nl.gamma, nl.theta_eff, nl.q, spec.m
    n = spec.domain.n
    checks = []
    checks.append(Check("gamma-range", "pass" if 0 <= gam <= 1 else "fail", f"gamma={gam}"))
    checks.append(Check("s-bar>s-low", "pass" if nl.s_up > nl.s_low else "fail",
                        f"s_low={nl.s_low}, s_up={nl.s_up}"))
    # (h1), (h2)
    if nl.mode == "model":
        checks.append(Check("h1", "pass" if nl.C_low >= 1 else "fail", "t^-γ ≤ C_low t^-γ"))
        ok2 = th <= gam and nl.C_up >= nl.s_up ** (th - gam)
        checks.append(Check("h2", "pass" if ok2 else "fail", f"t^-γ ≤ C_up t^-θ for t ≥ {nl.s_up}"))
        checks.append(Check("h-nonzero-at-0", "pass", "model h(0)=+∞" if gam > 0 else "h ≡ 1"))
    else:
        h = nl.h
        lo = LOG_GRID[LOG_GRID <= nl.s_low]
        hi = LOG_GRID[LOG_GRID >= nl.s_up]
        with np.errstate(all="ignore"):
            ok1 = bool(np.all(h(lo) * lo**gam <= nl.C_low * (1 + 1e-12)))
            ok2 = bool(np.all(h(hi) * hi**th <= nl.C_up * (1 + 1e-12)))
            h0 = h(np.array([0.0]))[0]
        checks.append(_sampled(ok1, "h1"))
        checks.append(_sampled(ok2, "h2"))
        nz = nl.singular_at_zero or (np.isfinite(h0) and h0 != 0)
        checks.append(Check("h-nonzero-at-0", "pass" if nz else "fail",
                            "declared singular" if nl.singular_at_zero else f"h(0)={h0:g}"))
    # (H)_f
    if th >= 1:
        ok = m >= 1 and spec.f.in_Lm(1, n) is not False
        checks.append(Check("Hf-integrability", "pass" if ok else "fail", "f ∈ L^1 (θ ≥ 1)"))
    else:
        if m <= 1:
            checks.append(Check("Hf-integrability", "fail", f"θ={th} < 1 needs m > 1, got m={m}"))
        else:
            ok = spec.f.in_Lm(m, n) is not False
            checks.append(Check("Hf-integrability", "pass" if ok else "fail", f"f ∈ L^{m}"))
    # f ≥ 0 and zero set
    fvals = None
    if grid is None and spec.domain.kind != "measure" and spec.f.kind != "samples":
        grid = build_grid(spec.domain, 64)
    if grid is not None:
        try:
            fvals = spec.f.sample(grid, nonnegative=False).values
        except InvalidInput as exc:
            checks.append(Check("f-sample", "fail", str(exc)))
    if fvals is not None:
        checks.append(Check("f-nonnegative", "pass" if np.all(fvals >= 0) else "fail", "at sample nodes"))
    # (g1)
    if th < 1:
        if m > 1:
            thr = (1 - m * th) / (m - 1)
            okq = q >= thr - 1e-14
            checks.append(Check("g1-exponent", "pass" if okq else "fail", f"q={q} ≥ (1-mθ)/(m-1)={thr:g}"))
        if nl.mode == "model":
            ok = nl.absorption_off or nl.nu <= 1
            checks.append(Check("g1-growth", "pass" if ok else "fail", "t^q ≥ ν t^q"))
        else:
            ts = LOG_GRID[LOG_GRID >= nl.s1]
            with np.errstate(over="ignore"):
                ok = bool(np.all(nl.g(ts) >= nl.nu * ts**q * (1 - 1e-12)))
            checks.append(_sampled(ok, "g1-growth"))
    else:
        checks.append(Check("g1-exponent", "n/a", "θ ≥ 1"))
    if nl.mode == "model" and not nl.absorption_off:
        checks.append(Check("q-nonnegative", "pass" if q >= 0 else "fail", f"q={q}"))
    g0 = float(nl.absorption()(np.array([0.0]))[0])
    checks.append(Check("g(0)=0", "pass" if g0 == 0 else "fail", f"g(0)={g0:g}"))
    # monotonicity (uniqueness and the shifted scheme)
    if nl.mode == "model":
        checks.append(Check("g-nondecreasing", "pass", "t^q, q ≥ 0"))
        checks.append(Check("h-nonincreasing", "pass", "t^-γ, γ ≥ 0"))
    else:
        ts = LOG_GRID
        with np.errstate(all="ignore"):
            gv, hv = nl.g(ts), nl.h(ts)
        okg = nl.g_nondecreasing and _monotone(gv, 1)
        okh = nl.h_nonincreasing and _monotone(hv, -1)
        checks.append(_sampled(okg, "g-nondecreasing"))
        checks.append(_sampled(okh, "h-nonincreasing"))
    # subcritical growth restriction of the regularised scheme
    if n >= 3:
        crit = (n + 2) / (n - 2)
        checks.append(Check("shifted-subcritical", "pass" if q <= crit else "fail", f"q ≤ 2*-1 = {crit:g}"))
    else:
        checks.append(Check("shifted-subcritical", "n/a", "every power is subcritical for n ≤ 2"))
    # |{f = 0}| = 0 when s > 1/2
    if spec.s > 0.5:
        if nl.mode == "model":
            checks.append(Check("f-positive-ae", "waived", "model problem: not required"))
        elif fvals is not None:
            app = all(c.status in ("pass", "sampled-pass", "n/a") for c in checks
                      if c.name in ("g-nondecreasing", "h-nonincreasing", "shifted-subcritical"))
            ok = bool(np.all(fvals > 0)) or app
            checks.append(Check("f-positive-ae", "pass" if ok else "fail",
                                "f > 0 at sample nodes" if np.all(fvals > 0) else "waived by monotone g, h"))
    else:
        checks.append(Check("f-positive-ae", "n/a", "s ≤ 1/2"))
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------

@dataclass
class RegimeReport:
    q_threshold: float
    m_threshold: Optional[float]
    case: Optional[str]
    genuine_gain: bool
    p_exponent: Optional[float]
    m_threshold_consistent: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def classify_regime(gamma, m, n, q=None) -> RegimeReport:
    if not (0 <= gamma <= 1) or m < 1 or n < 1:
        raise InvalidInput("need γ ∈ [0,1], m ≥ 1, n ≥ 1", code="outside-theory")
    if m == 1 and gamma < 1:
        raise InvalidInput("m = 1 requires γ = 1", code="outside-theory")
    q_thr = -1.0 if gamma == 1 else (1 - m * gamma) / (m - 1)
    den = n * (gamma + 1) - 2 * (1 - gamma)
    m_thr = 2 * n / den if den > 0 else None
    m_cons = 2 * n / (n * (gamma + 1) + 2 * (1 - gamma))
    if m <= 1:
        case = None
    elif 2 * m < n:
        case = "i"
    elif 2 * m > n:
        case = "ii"
    else:
        case = "iii"
    p = n * m * (gamma + 1) / (n - 2 * m) if case == "i" else None
    gain = bool(case == "i" and q_thr + 1 < p)
    return RegimeReport(q_thr, m_thr, case, gain, p, m_cons)
