"""Exact rearrangements of piecewise-constant data.

A nodal field is read as a cell function: every interior node carries its
value on a cell of measure ``cell_measure``. Distribution functions and
decreasing rearrangements of such data are finite step functions, so all
identities below hold up to rounding.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as Gamma

from .errors import InvalidInput
from .grid import GridFunction

PROFILE_HEADER = "# mixsing profile v1, volume={volume!r}"


def unit_ball_volume(n):
    return math.pi ** (n / 2) / Gamma(n / 2 + 1)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """μ(t) = ``values[i]`` for t in [breakpoints[i], breakpoints[i+1]); 0 past the last level."""
    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self.breakpoints, t, side="right") - 1
        vals = np.append(self.values, 0.0)
        return np.where(i < 0, self.values[0] if len(self.values) else 0.0,
                        vals[np.clip(i, 0, len(self.values))])

    def equals(self, other, atol=0.0):
        return (len(self.breakpoints) == len(other.breakpoints)
                and np.allclose(self.breakpoints, other.breakpoints, rtol=0, atol=atol)
                and np.allclose(self.values, other.values, rtol=0, atol=atol))


@dataclass(frozen=True, eq=False)
class RearrangedProfile:
    """Nonincreasing step profile: ``values[i]`` on [breakpoints[i], breakpoints[i+1])."""
    breakpoints: np.ndarray
    values: np.ndarray
    total_measure: float

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if len(b) != len(v) + 1 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise InvalidInput("profile breakpoints must start at 0 and increase", code="invalid-profile")
        if np.any(np.diff(v) > 0) or np.any(v < 0):
            raise InvalidInput("profile values must be nonnegative and nonincreasing",
                               code="invalid-profile")
        if b[-1] > self.total_measure * (1 + 1e-12):
            raise InvalidInput("profile extends past the total measure", code="invalid-profile")
        if b[-1] < self.total_measure:
            b = np.append(b, self.total_measure)
            v = np.append(v, 0.0)
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "total_measure", float(self.total_measure))

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    def __call__(self, s):
        i = np.searchsorted(self.breakpoints, np.asarray(s, dtype=float), side="right") - 1
        return self.values[np.clip(i, 0, len(self.values) - 1)]

    def sup(self):
        return float(self.values[0]) if len(self.values) else 0.0

    def on_breakpoints(self, bps):
        """Values on the cells of a refinement ``bps`` of the breakpoints."""
        bps = np.asarray(bps, dtype=float)
        return self(bps[:-1])

    def integral(self):
        return float(np.sum(self.values * self.widths))

    def distribution(self):
        return distribution_function((self.values, self.widths))

    def map(self, func):
        """Profile of ``func`` applied to the values (``func`` nondecreasing, func(0) ≥ 0)."""
        return RearrangedProfile(self.breakpoints, func(self.values), self.total_measure)

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(PROFILE_HEADER.format(volume=self.total_measure) + "\n")
        buf.write("s_breakpoint,value\n")
        for b, v in zip(self.breakpoints, np.append(self.values, 0.0)):
            buf.write(f"{float(b)!r},{float(v)!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        text = source if "\n" in str(source) else open(source).read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# mixsing profile v1, volume="):
            raise InvalidInput("missing profile header", code="invalid-csv")
        volume = float(lines[0].split("volume=", 1)[1])
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
        return cls(rows[:, 0], rows[:-1, 1], volume)


def common_breakpoints(*profiles):
    V = profiles[0].total_measure
    if any(not math.isclose(p.total_measure, V, rel_tol=1e-12) for p in profiles):
        raise InvalidInput("profiles live on different measure intervals", code="measure-mismatch")
    b = np.unique(np.concatenate([p.breakpoints for p in profiles]))
    return b[b <= V]


def _pairs(u):
    if isinstance(u, GridFunction):
        vals = np.abs(u.values)
        return vals, np.full(vals.shape, u.grid.cell_measure), u.grid.domain.volume
    if isinstance(u, RearrangedProfile):
        return u.values, u.widths, u.total_measure
    if isinstance(u, tuple) and len(u) == 2 and np.ndim(u[0]) == 1:
        vals, meas = (np.asarray(a, dtype=float) for a in u)
    else:
        arr = np.asarray(list(u), dtype=float)
        if arr.size == 0:
            raise InvalidInput("empty input", code="empty-input")
        vals, meas = arr[:, 0], arr[:, 1]
    if vals.size == 0:
        raise InvalidInput("empty input", code="empty-input")
    if vals.shape != meas.shape or not np.all(np.isfinite(vals)) or np.any(meas <= 0):
        raise InvalidInput("values must be finite and measures positive", code="invalid-input")
    return np.abs(vals), meas, None


def distribution_function(u) -> StepFunction:
    """μ_u(t) = |{|u| > t}| as an exact step function in t ≥ 0."""
    vals, meas, _ = _pairs(u)
    levels, inv = np.unique(vals, return_inverse=True)
    weight = np.bincount(inv, weights=meas, minlength=len(levels))
    # μ on [levels[i-1], levels[i]) is the measure of values ≥ levels[i]
    above = np.cumsum(weight[::-1])[::-1]
    pos = levels > 0
    return StepFunction(np.concatenate([[0.0], levels[pos]]), above[pos])


def decreasing_rearrangement(u, volume=None) -> RearrangedProfile:
    """u*(s) = sup{t ≥ 0 : μ_u(t) > s}; ties merge into one plateau."""
    vals, meas, vol = _pairs(u)
    total = float(volume if volume is not None else (vol if vol is not None else meas.sum()))
    levels, inv = np.unique(vals, return_inverse=True)
    weight = np.bincount(inv, weights=meas, minlength=len(levels))
    levels, weight = levels[::-1], weight[::-1]
    pos = levels > 0
    levels, weight = levels[pos], weight[pos]
    if meas.sum() > total * (1 + 1e-12):
        raise InvalidInput("data measure exceeds the domain volume", code="measure-mismatch")
    bps = np.concatenate([[0.0], np.cumsum(weight)])
    if bps[-1] > total * (1 - 1e-12):
        bps[-1] = total  # summation roundoff, not a zero plateau
    return RearrangedProfile(bps, levels, total)


def schwarz_rearrangement(profile: RearrangedProfile, n: int):
    """x ↦ u*(ω_n |x|^n) on the ball of volume |Ω|, zero outside."""
    if n < 1:
        raise InvalidInput("dimension must be positive", code="invalid-dimension")
    omega = unit_ball_volume(n)
    V = profile.total_measure

    def u_sharp(x):
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if n == 1 and (x.ndim == 0 or x.shape[-1] != 1) else np.linalg.norm(x, axis=-1)
        s = omega * r**n
        return np.where(s < V, profile(np.minimum(s, V)), 0.0)

    return u_sharp


def profile_product_integral(a: RearrangedProfile, b: RearrangedProfile) -> float:
    bps = common_breakpoints(a, b)
    return float(np.sum(a.on_breakpoints(bps) * b.on_breakpoints(bps) * np.diff(bps)))


def hardy_littlewood_gap(u, v) -> float:
    """∫u*v* − ∫|uv|, computed exactly."""
    if isinstance(u, GridFunction) and isinstance(v, GridFunction):
        if not u.grid.compatible(v.grid):
            raise InvalidInput("grid functions live on different grids", code="grid-mismatch")
        uv = float(np.sum(np.abs(u.values * v.values)) * u.grid.cell_measure)
    else:
        uu, mu, _ = _pairs(u)
        vv, mv, _ = _pairs(v)
        if uu.shape != vv.shape or not np.allclose(mu, mv, rtol=1e-14, atol=0):
            raise InvalidInput("data must share the cell structure", code="measure-mismatch")
        uv = float(np.sum(uu * vv * mu))
    pu = decreasing_rearrangement(u)
    pv = decreasing_rearrangement(v, volume=pu.total_measure)
    return profile_product_integral(pu, pv) - uv


def profile_lp_norm(profile: RearrangedProfile, p) -> float:
    if not p >= 1:
        raise InvalidInput(f"need p ≥ 1, got {p}", code="invalid-exponent")
    if math.isinf(p):
        return profile.sup()
    return float(np.sum(profile.values**p * profile.widths) ** (1 / p))


def profile_distance(a: RearrangedProfile, b: RearrangedProfile, p) -> float:
    """‖a − b‖ in L^p(0, |Ω|)."""
    bps = common_breakpoints(a, b)
    d = np.abs(a.on_breakpoints(bps) - b.on_breakpoints(bps))
    if math.isinf(p):
        return float(d.max(initial=0.0))
    return float(np.sum(d**p * np.diff(bps)) ** (1 / p))
