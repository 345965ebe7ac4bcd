"""Domains, uniform nodal grids and grid functions.

A :class:`GridFunction` stores values at interior nodes only; the function it
represents is the P1 (1D) or Q1 (2D) nodal interpolant on the domain and is
identically zero on the complement of the domain.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HypothesisViolation, InvalidInput

CSV_HEADER = "# mixsing gridfunction v1, n={n}, N={N}"


@dataclass(frozen=True)
class Domain:
    kind: str
    bounds: tuple = ()
    n: int = 1
    volume: float = 0.0

    @classmethod
    def interval(cls, a, b):
        if not b > a:
            raise InvalidInput(f"interval ({a}, {b}) has nonpositive length", code="invalid-domain")
        return cls("interval", (float(a), float(b)), 1, float(b - a))

    @classmethod
    def rectangle(cls, ax, bx, ay, by):
        if not (bx > ax and by > ay):
            raise InvalidInput("rectangle has a nonpositive side", code="invalid-domain")
        return cls("rectangle", (float(ax), float(bx), float(ay), float(by)), 2,
                   float((bx - ax) * (by - ay)))

    @classmethod
    def measure_only(cls, n, volume):
        if int(n) != n or n < 1 or not volume > 0:
            raise InvalidInput("measure-only domain needs n >= 1 and volume > 0", code="invalid-domain")
        return cls("measure", (), int(n), float(volume))

    @property
    def sides(self):
        b = self.bounds
        return tuple(b[2 * i + 1] - b[2 * i] for i in range(len(b) // 2))

    @property
    def lower(self):
        return tuple(self.bounds[0::2])

    def to_dict(self):
        if self.kind == "measure":
            return {"kind": "measure", "n": self.n, "volume": self.volume}
        return {"kind": self.kind, "bounds": list(self.bounds)}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "interval")
        if kind == "interval":
            return cls.interval(*d.get("bounds", (-1.0, 1.0)))
        if kind == "rectangle":
            return cls.rectangle(*d.get("bounds", (0.0, 1.0, 0.0, 1.0)))
        if kind == "measure":
            return cls.measure_only(d["n"], d["volume"])
        raise InvalidInput(f"unknown domain kind {kind!r}", code="invalid-domain")


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    N: int
    spacing: tuple
    interior_nodes: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.domain.n

    @property
    def h(self):
        return max(self.spacing)

    @property
    def cell_measure(self):
        return math.prod(self.spacing)

    @property
    def size(self):
        return len(self.interior_nodes)

    @property
    def shape(self):
        """Interior node counts per axis."""
        return (self.N - 1,) * self.n

    def all_nodes_1d(self, axis=0):
        lo = self.domain.lower[axis]
        return lo + self.spacing[axis] * np.arange(self.N + 1)

    def compatible(self, other):
        return (self is other) or (self.domain == other.domain and self.N == other.N)


def build_grid(domain: Domain, N: int) -> Grid:
    """Uniform grid with ``N`` subdivisions per axis; interior nodes in lexicographic order."""
    if domain.kind == "measure":
        raise InvalidInput("measure-only domains cannot be meshed", code="unsupported-domain")
    if int(N) != N or N < 2:
        raise InvalidInput(f"need N >= 2 subdivisions, got {N}", code="invalid-subdivision")
    N = int(N)
    spacing = tuple(side / N for side in domain.sides)
    axes = [lo + h * np.arange(1, N) for lo, h in zip(domain.lower, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    nodes.setflags(write=False)
    return Grid(domain, N, spacing, nodes)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise InvalidInput(
                f"expected {self.grid.size} nodal values, got shape {v.shape}", code="grid-mismatch")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(self.grid, other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(self.grid, other))

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def lp_norm(self, p):
        """Norm of the piecewise-constant cell reinterpretation."""
        a = np.abs(self.values)
        if math.isinf(p):
            return float(a.max(initial=0.0))
        return float((np.sum(a**p) * self.grid.cell_measure) ** (1.0 / p))

    def to_csv(self, path=None):
        buf = io.StringIO()
        g = self.grid
        buf.write(CSV_HEADER.format(n=g.n, N=g.N) + "\n")
        names = ["x", "y"][: g.n] + ["value"]
        buf.write(",".join(names) + "\n")
        for coords, val in zip(g.interior_nodes, self.values):
            buf.write(",".join(repr(float(c)) for c in coords) + "," + repr(float(val)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, grid: Grid, source):
        """Read values written by :meth:`to_csv`; node coordinates must match ``grid``."""
        text = source if "\n" in str(source) else open(source).read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# mixsing gridfunction v1"):
            raise InvalidInput("missing gridfunction header", code="invalid-csv")
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
        if rows.shape != (grid.size, grid.n + 1) or not np.allclose(
                rows[:, :-1], grid.interior_nodes, rtol=0, atol=1e-12):
            raise InvalidInput("CSV nodes do not match the grid", code="grid-mismatch")
        return cls(grid, rows[:, -1])


def _vals(grid, other):
    if isinstance(other, GridFunction):
        if not grid.compatible(other.grid):
            raise InvalidInput("grid functions live on different grids", code="grid-mismatch")
        return other.values
    return other


def sample_function(grid: Grid, f: Callable, *, nonnegative=False) -> GridFunction:
    """Evaluate ``f(x)`` (1D) or ``f(x, y)`` (2D) at the interior nodes."""
    coords = grid.interior_nodes
    with np.errstate(all="ignore"):  # non-finite values are rejected below
        vals = np.broadcast_to(np.asarray(f(*coords.T), dtype=float), (grid.size,)).copy()
    if not np.all(np.isfinite(vals)):
        raise InvalidInput("non-finite sample value", code="invalid-sample")
    if nonnegative and np.any(vals < 0):
        i = int(np.argmin(vals))
        raise HypothesisViolation(
            f"source datum is negative at node {coords[i].tolist()} ({vals[i]:g})")
    return GridFunction(grid, vals)
