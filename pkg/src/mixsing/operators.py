"""Discrete mixed local/nonlocal operator on a uniform grid.

Conforming P1 (1D) / Q1 (2D) elements. The fractional form is

    [u, v]_s = ∬_{R^n x R^n} (u(x)-u(y)) (v(x)-v(y)) / |x-y|^{n+2s} dx dy

with no normalisation constant. Because discrete functions vanish outside the
domain it splits exactly into an interior double integral plus
``2 ∫ u v κ`` with ``κ(x) = ∫_{R^n \\ Ω} |x-y|^{-n-2s} dy``.

Interior cell pairs are integrated in difference coordinates ``ζ = y - x``:
for a fixed pair offset the overlap integral ``G(ζ)`` is a polynomial on each
unit sub-box of ζ-space, and it vanishes to second order at ``ζ = 0`` once the
shared vertices of the two cells are merged. Sub-boxes touching the origin
use a Duffy split with Gauss-Jacobi in the radial variable (exact in r);
the rest use tensor Gauss-Legendre.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.special import betainc, beta as beta_fn, roots_jacobi

from .errors import InvalidInput
from .grid import Grid, GridFunction

MAX_DENSE_NODES = 10_000


@lru_cache(maxsize=None)
def _gl01(q):
    x, w = leggauss(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _gj01(q, b):
    """Nodes/weights on [0,1] for the weight r**b."""
    x, w = roots_jacobi(q, 0.0, b)
    return (x + 1) / 2, w * 2.0 ** (-b - 1)


def _check_order(s):
    if not 0 < s < 1:
        raise InvalidInput(f"fractional order must lie in (0,1), got {s}", code="invalid-order")


# ---------------------------------------------------------------------------
# local part
# ---------------------------------------------------------------------------

def _stiff_1d(N, h):
    m = N - 1
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h


def _mass_1d(N, h):
    m = N - 1
    return sp.diags([np.ones(m - 1) / 6, 2 * np.ones(m) / 3, np.ones(m - 1) / 6], [-1, 0, 1]) * h


def assemble_local(grid: Grid) -> sp.csr_matrix:
    """Stiffness matrix of -Δ with homogeneous Dirichlet data (P1 / Q1)."""
    if grid.n == 1:
        return _stiff_1d(grid.N, grid.spacing[0]).tocsr()
    hx, hy = grid.spacing
    Kx, Ky = _stiff_1d(grid.N, hx), _stiff_1d(grid.N, hy)
    Mx, My = _mass_1d(grid.N, hx), _mass_1d(grid.N, hy)
    return (sp.kron(Kx, My) + sp.kron(Mx, Ky)).tocsr()


# ---------------------------------------------------------------------------
# nonlocal interior part
# ---------------------------------------------------------------------------

class _PairIntegrator:
    """Element-pair matrices for cells K = [0,1]^n and L = d + [0,1]^n (reference units)."""

    def __init__(self, s, spacing, inner_q=3, radial_q=4, angular_q=14):
        self.s = s
        self.n = len(spacing)
        self.H = np.asarray(spacing, dtype=float)
        self.detH2 = float(np.prod(self.H)) ** 2
        self.inner = _gl01(inner_q)
        self.radial = _gj01(radial_q, 1.0 - 2.0 * s)
        self.angular = _gl01(angular_q)

    def vertices(self, d):
        ref = list(itertools.product((0, 1), repeat=self.n))
        verts = set(ref) | {tuple(r + di for r, di in zip(v, d)) for v in ref}
        return sorted(verts)

    def _coeffs(self, verts, d, xi, eta):
        # xi, eta: (..., n); returns (nv, ...)
        out = []
        for w in verts:
            cK = _shape(w, xi)
            cL = _shape(tuple(wi - di for wi, di in zip(w, d)), eta)
            out.append(cK - cL)
        return np.stack(out)

    def overlap(self, verts, d, zeta):
        """G_{wv}(ζ) for ζ of shape (P, n); returns (nv, nv, P)."""
        d_arr = np.asarray(d, dtype=float)
        lo = np.maximum(0.0, d_arr - zeta)
        hi = np.minimum(1.0, d_arr + 1.0 - zeta)
        g, w = self.inner
        q = len(g)
        grids = np.meshgrid(*([np.arange(q)] * self.n), indexing="ij")
        idx = np.stack([gr.ravel() for gr in grids], axis=1)  # (Q, n)
        wq = np.prod(w[idx], axis=1)  # (Q,)
        xi = lo[:, None, :] + (hi - lo)[:, None, :] * g[idx][None, :, :]  # (P, Q, n)
        vol = np.prod(np.clip(hi - lo, 0.0, None), axis=1)  # (P,)
        eta = xi + zeta[:, None, :] - d_arr
        c = self._coeffs(verts, d, xi, eta)  # (nv, P, Q)
        return np.einsum("apq,bpq,q,p->abp", c, c, wq, vol)

    def kernel(self, zeta):
        r = np.linalg.norm(zeta * self.H, axis=-1)
        return r ** (-self.n - 2.0 * self.s)

    def matrix(self, d):
        verts = self.vertices(d)
        nv = len(verts)
        E = np.zeros((nv, nv))
        for box in itertools.product(*[((di - 1, di), (di, di + 1)) for di in d]):
            corners = [b for b in box]
            if all(0 in b for b in corners):
                E += self._singular_box(verts, d, [b[0] + b[1] for b in corners])
            else:
                E += self._regular_box(verts, d, corners)
        return verts, self.detH2 * E

    def _regular_box(self, verts, d, box):
        dist = math.sqrt(sum(min(abs(a), abs(b)) ** 2 if a * b > 0 else 0.0 for a, b in box))
        if self.n == 1:
            q = 16 if dist <= 1 else 12 if dist <= 3 else 8
        else:
            q = 10 if dist <= 1 else 7 if dist <= 3 else 5
        g, w = _gl01(q)
        pts = [a + (b - a) * g for a, b in box]
        mesh = np.meshgrid(*pts, indexing="ij")
        zeta = np.stack([m.ravel() for m in mesh], axis=1)
        wm = np.meshgrid(*([w] * self.n), indexing="ij")
        wz = np.prod(np.stack([m.ravel() for m in wm]), axis=0)
        G = self.overlap(verts, d, zeta)
        return G @ (wz * self.kernel(zeta))

    def _singular_box(self, verts, d, signs):
        r, wr = self.radial
        sig = np.asarray(signs, dtype=float)
        if self.n == 1:
            zeta = (sig[0] * r)[:, None]
            G = self.overlap(verts, d, zeta)
            scale = self.H[0] ** (-1.0 - 2.0 * self.s)
            return G @ (wr * scale / r**2)
        t, wt = self.angular
        total = 0.0
        for swap in (False, True):
            R, T = np.meshgrid(r, t, indexing="ij")
            e = np.stack([np.ones_like(T), T], axis=-1)
            if swap:
                e = e[..., ::-1]
            e = e * sig
            zeta = (R[..., None] * e).reshape(-1, 2)
            ang = np.linalg.norm(e * self.H, axis=-1) ** (-2.0 - 2.0 * self.s)
            wts = (wr[:, None] * wt[None, :] * ang / R**2).ravel()
            total = total + self.overlap(verts, d, zeta) @ wts
        return total


def _shape(v, pts):
    """Reference Q1/P1 shape function of vertex ``v`` at ``pts`` (zero if v is not a vertex)."""
    if any(vi not in (0, 1) for vi in v):
        return np.zeros(pts.shape[:-1])
    out = np.ones(pts.shape[:-1])
    for i, vi in enumerate(v):
        out = out * (pts[..., i] if vi else 1.0 - pts[..., i])
    return out


def _interior_index(grid):
    N, n = grid.N, grid.n
    idx = -np.ones((N + 1,) * n, dtype=np.int64)
    inner = (slice(1, N),) * n
    idx[inner] = np.arange((N - 1) ** n).reshape((N - 1,) * n)
    return idx


def assemble_interior_nonlocal(grid: Grid, s: float) -> np.ndarray:
    """∬_{Ω×Ω} (φ_i(x)-φ_i(y))(φ_j(x)-φ_j(y)) |x-y|^{-n-2s} over interior nodes."""
    _check_order(s)
    N, n = grid.N, grid.n
    integ = _PairIntegrator(s, grid.spacing)
    vidx = _interior_index(grid)
    A = np.zeros((grid.size, grid.size))
    offsets = [d for d in itertools.product(range(-(N - 1), N), repeat=n) if d >= (0,) * n]
    for d in offsets:
        verts, E = integ.matrix(d)
        factor = 1.0 if all(di == 0 for di in d) else 2.0
        ranges = [np.arange(max(0, -di), N - max(0, di)) for di in d]
        cells = np.stack([m.ravel() for m in np.meshgrid(*ranges, indexing="ij")], axis=1)
        gl = [vidx[tuple((cells + np.asarray(w)).T)] for w in verts]
        for a, ga in enumerate(gl):
            for b, gb in enumerate(gl):
                e = factor * E[a, b]
                if e == 0.0:
                    continue
                mask = (ga >= 0) & (gb >= 0)
                A[ga[mask], gb[mask]] += e
    return 0.5 * (A + A.T)


# ---------------------------------------------------------------------------
# exterior tail
# ---------------------------------------------------------------------------

def tail_kappa(grid_or_domain, s, points):
    """κ(x) = ∫_{R^n \\ Ω} |x-y|^{-n-2s} dy at ``points`` (shape (P, n)) inside Ω."""
    _check_order(s)
    dom = getattr(grid_or_domain, "domain", grid_or_domain)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if dom.n == 1:
        a, b = dom.bounds
        x = pts[:, 0]
        return ((x - a) ** (-2 * s) + (b - x) ** (-2 * s)) / (2 * s)
    ax, bx, ay, by = dom.bounds
    x, y = pts[:, 0], pts[:, 1]
    # distances to the four sides, outward normal angles 0, pi/2, pi, 3pi/2
    D = np.stack([bx - x, by - y, x - ax, y - ay])
    # corner angles measured from each side normal: ray hits side k for φ in (-α_k, β_k)
    Dnext = np.roll(D, -1, axis=0)
    Dprev = np.roll(D, 1, axis=0)
    alpha = np.arctan2(Dprev, D)
    beta_ = np.arctan2(Dnext, D)
    c = 0.5 * beta_fn(0.5, s + 0.5)
    piece = c * (betainc(0.5, s + 0.5, np.sin(alpha) ** 2) + betainc(0.5, s + 0.5, np.sin(beta_) ** 2))
    return np.sum(D ** (-2 * s) * piece, axis=0) / (2 * s)


def _graded_rule(q=6, levels=12, ratio=0.25):
    """Composite Gauss rule on [0,1] geometrically graded towards 0."""
    g, w = _gl01(q)
    edges = np.r_[0.0, ratio ** np.arange(levels, -1, -1)]
    xs = np.concatenate([a + (b - a) * g for a, b in zip(edges[:-1], edges[1:])])
    ws = np.concatenate([(b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    return xs, ws


def assemble_tail(grid: Grid, s: float) -> np.ndarray:
    """Matrix of ``2 ∫_Ω φ_i φ_j κ dx`` over interior nodes."""
    _check_order(s)
    N, n = grid.N, grid.n
    vidx = _interior_index(grid)
    T = np.zeros((grid.size, grid.size))
    H = np.asarray(grid.spacing)
    lower = np.asarray(grid.domain.lower)
    g12, w12 = _gl01(12 if n == 1 else 6)
    graded = _graded_rule()
    ref = list(itertools.product((0, 1), repeat=n))
    for cell in itertools.product(range(N), repeat=n):
        rules = []
        for i, c in enumerate(cell):
            if N == 1:
                raise InvalidInput("grid too coarse", code="invalid-subdivision")
            if c == 0:
                rules.append(graded)
            elif c == N - 1:
                x, w = graded
                rules.append((1.0 - x, w))
            else:
                rules.append((g12, w12))
        mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        xi = np.stack([m.ravel() for m in mesh], axis=1)
        wm = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        wq = np.prod(np.stack([m.ravel() for m in wm]), axis=0) * np.prod(H)
        phys = lower + (np.asarray(cell) + xi) * H
        kap = tail_kappa(grid, s, phys)
        if n == 1 and cell[0] in (0, N - 1):
            kap = _tail_1d_split(grid, s, phys[:, 0], cell[0])
        verts = [tuple(np.asarray(cell) + np.asarray(v)) for v in ref]
        gids = [vidx[v] for v in verts]
        phis = [_shape(v, xi) for v in ref]
        for a, ga in enumerate(gids):
            if ga < 0:
                continue
            for b, gb in enumerate(gids):
                if gb < 0:
                    continue
                T[ga, gb] += 2.0 * np.sum(wq * phis[a] * phis[b] * kap)
    if n == 1:
        T += _tail_1d_boundary_exact(grid, s)
    return 0.5 * (T + T.T)


def _tail_1d_split(grid, s, x, c):
    # boundary cells: only the far-side contribution is integrated numerically;
    # the near-side singular part is added in closed form
    a, b = grid.domain.bounds
    if c == 0:
        return (b - x) ** (-2 * s) / (2 * s)
    return (x - a) ** (-2 * s) / (2 * s)


def _tail_1d_boundary_exact(grid, s):
    # 2 ∫_0^h (t/h)^2 t^{-2s} / (2s) dt for the hat next to each endpoint
    h = grid.spacing[0]
    val = 2.0 * h ** (1 - 2 * s) / (2 * s * (3 - 2 * s))
    T = np.zeros((grid.size, grid.size))
    T[0, 0] += val
    T[-1, -1] += val
    return T


def assemble_fractional(grid: Grid, s: float):
    """Dense fractional stiffness (interior form plus exterior tail) and nodal κ."""
    _check_order(s)
    if grid.size > MAX_DENSE_NODES:
        raise InvalidInput(
            f"{grid.size} interior nodes exceed the dense cap of {MAX_DENSE_NODES}", code="too-large")
    A = assemble_interior_nonlocal(grid, s) + assemble_tail(grid, s)
    A = 0.5 * (A + A.T)
    kappa = tail_kappa(grid, s, grid.interior_nodes)
    return A, kappa


# ---------------------------------------------------------------------------
# operator object
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMixedOperator:
    grid: Grid
    s: float
    A_loc: sp.csr_matrix = field(repr=False)
    A_frac: np.ndarray = field(repr=False)
    tail: np.ndarray = field(repr=False)

    @property
    def lumped_mass(self):
        return self.grid.cell_measure

    @property
    def dense(self):
        return self.A_loc.toarray() + self.A_frac

    def apply(self, u):
        u = _values(self.grid, u)
        return self.A_loc @ u + self.A_frac @ u

    def local_energy(self, u):
        u = _values(self.grid, u)
        return float(u @ (self.A_loc @ u))

    def fractional_energy(self, u):
        u = _values(self.grid, u)
        return float(u @ (self.A_frac @ u))

    def without_fractional(self):
        """Test hook: same grid with the nonlocal part switched off."""
        return replace(self, A_frac=np.zeros_like(self.A_frac))

    def with_fault(self, kind="sign-flip"):
        """Test hook: corrupt A_frac so that symmetry checks must fail."""
        B = self.A_frac.copy()
        if kind == "sign-flip" and B.shape[0] > 1:
            B[0, 1] = -B[0, 1]
        return replace(self, A_frac=B)

    def dump(self, directory):
        import os
        coo = self.A_loc.tocoo()
        with open(os.path.join(directory, "A_loc.csv"), "w") as fh:
            fh.write("row,col,value\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i},{j},{float(v)!r}\n")
        with open(os.path.join(directory, "tail.csv"), "w") as fh:
            fh.write("node,kappa\n")
            for i, v in enumerate(self.tail):
                fh.write(f"{i},{float(v)!r}\n")


def build_operator(grid: Grid, s: float) -> DiscreteMixedOperator:
    _check_order(s)
    A_frac, kappa = assemble_fractional(grid, s)
    return DiscreteMixedOperator(grid, float(s), assemble_local(grid), A_frac, kappa)


def _values(grid, u):
    if isinstance(u, GridFunction):
        if not grid.compatible(u.grid):
            raise InvalidInput("grid function and operator live on different grids", code="grid-mismatch")
        return u.values
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise InvalidInput("vector length does not match the grid", code="grid-mismatch")
    return u


def bilinear_form(op: DiscreteMixedOperator, u, v) -> float:
    """B_h(u, v) = uᵀ (A_loc + A_frac) v; B_h(u, u) is the discrete ρ(u)²."""
    uu, vv = _values(op.grid, u), _values(op.grid, v)
    return float(uu @ (op.A_loc @ vv) + uu @ (op.A_frac @ vv))


def fit_embedding_constant(op_or_grid, s=None, samples=()):
    """Largest observed ratio [u]_s² / ‖∇u‖² over ``samples`` (empirical lower bound for β)."""
    op = op_or_grid if isinstance(op_or_grid, DiscreteMixedOperator) else build_operator(op_or_grid, s)
    best = 0.0
    if not samples:
        raise InvalidInput("no samples supplied", code="degenerate-input")
    for u in samples:
        loc = op.local_energy(u)
        if loc <= 0:
            raise InvalidInput("all-zero sample", code="degenerate-input")
        best = max(best, op.fractional_energy(u) / loc)
    return best
