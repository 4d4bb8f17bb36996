"""Lattice PDE companions of the exclusion process.

One-dimensional half: density profiles on {0, ..., N} with clamped
boundary values and the discrete Laplacian N^2 (f(x+1) + f(x-1) - 2 f(x)),
solved exactly in the sine eigenbasis.

Two-dimensional half: fields on the discrete triangle
V = {(x, y) : 0 < x < y < N} with absorbing boundary {x = 0 or y = N},
carrying the 5-point Laplacian away from the superdiagonal and the
2-neighbour stencil N^2 (f(x-1, x+1) + f(x, x+2) - 2 f(x, x+1)) on it.
This is the operator governing two-point correlation functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """A linear or time-stepping solve failed to meet its tolerance."""


# ---------------------------------------------------------------------------
# profiles on {0..N}

@dataclass
class Profile1D:
    """Grid function on sites 0..n; entries 0 and n are reservoir values."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.n + 1,):
            raise ValueError(f"values must have length n + 1 = {self.n + 1}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")

    @classmethod
    def linear(cls, n: int, alpha: float, beta: float) -> "Profile1D":
        return cls(n, alpha + (beta - alpha) * np.arange(n + 1) / n)

    @classmethod
    def from_function(cls, n: int, fn) -> "Profile1D":
        return cls(n, np.asarray([fn(x / n) for x in range(n + 1)], dtype=np.float64))

    @property
    def alpha(self) -> float:
        return float(self.values[0])

    @property
    def beta(self) -> float:
        return float(self.values[-1])

    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def copy(self) -> "Profile1D":
        return Profile1D(self.n, self.values.copy())


def laplacian_1d(p: Profile1D) -> np.ndarray:
    """N^2-scaled second difference at the interior sites 1..n-1."""
    v = p.values
    return p.n * p.n * (v[2:] + v[:-2] - 2.0 * v[1:-1])


def discrete_gradient(p: Profile1D) -> np.ndarray:
    """n (v(x+1) - v(x)) for x = 0..n-1, boundary differences included."""
    return p.n * np.diff(p.values)


@lru_cache(maxsize=32)
def _heat_basis(n: int):
    # sine eigenvectors and decay rates of the clamped discrete Laplacian
    x = np.arange(1, n)
    k = np.arange(1, n)
    s = np.sin(np.pi * np.outer(k, x) / n)          # s[k-1, x-1]
    mu = 4.0 * n * n * np.sin(np.pi * k / (2.0 * n)) ** 2
    return s, mu


def heat_profiles(p0: Profile1D, taus) -> np.ndarray:
    """Heat semigroup applied to p0, evaluated at several diffusive times.

    Returns an array of shape (len(taus), n - 1) with the interior values;
    boundaries stay clamped at p0's reservoir values.  Exact up to roundoff
    (eigenbasis evaluation, no time stepping).
    """
    taus = np.asarray(taus, dtype=np.float64)
    if np.any(taus < 0.0):
        raise ValueError("times must be nonnegative")
    n = p0.n
    s, mu = _heat_basis(n)
    lin = Profile1D.linear(n, p0.alpha, p0.beta).values[1:-1]
    coeff = (2.0 / n) * (s @ (p0.values[1:-1] - lin))
    decayed = coeff[None, :] * np.exp(-np.outer(taus, mu))
    return lin[None, :] + decayed @ s


def solve_heat_1d(p0: Profile1D, tau: float) -> Profile1D:
    """Profile at diffusive time tau with reservoirs clamped."""
    interior = heat_profiles(p0, [tau])[0]
    out = p0.values.copy()
    out[1:-1] = interior
    return Profile1D(p0.n, out)


@dataclass
class GradientMaxReport:
    passed: bool
    initial_max: float
    observed_max: float
    witness_tau: float
    tolerance: float


def gradient_maxprinciple_check(p0: Profile1D, taus, tolerance: float = 1e-9) -> GradientMaxReport:
    """Check that the sup of |grad| never exceeds its initial value.

    The gradient includes the boundary differences, so the check also
    covers the reservoir jumps n (rho(1) - alpha) and n (beta - rho(n-1)).
    """
    g0 = float(np.max(np.abs(discrete_gradient(p0))))
    taus = np.asarray(taus, dtype=np.float64)
    interiors = heat_profiles(p0, taus)
    worst = -np.inf
    witness = 0.0
    for t, inner in zip(taus, interiors):
        v = p0.values.copy()
        v[1:-1] = inner
        g = float(np.max(np.abs(p0.n * np.diff(v))))
        if g > worst:
            worst = g
            witness = float(t)
    return GradientMaxReport(worst <= g0 + tolerance, g0, worst, witness, tolerance)


# ---------------------------------------------------------------------------
# triangle fields

@lru_cache(maxsize=16)
def _tri_index(n: int):
    pts = []
    idx = -np.ones((n + 1, n + 1), dtype=np.int64)
    for x in range(1, n):
        for y in range(x + 1, n):
            idx[x, y] = len(pts)
            pts.append((x, y))
    return np.asarray(pts, dtype=np.int64), idx


class TriangleField:
    """Function on {0 <= x < y <= n}, zero on the absorbing edge x=0 or y=n."""

    def __init__(self, n: int, vec: np.ndarray | None = None):
        if n < 2:
            raise ValueError("n must be at least 2")
        self.n = n
        pts, _ = _tri_index(n)
        m = pts.shape[0]
        if vec is None:
            self.vec = np.zeros(m, dtype=np.float64)
        else:
            self.vec = np.asarray(vec, dtype=np.float64)
            if self.vec.shape != (m,):
                raise ValueError(f"expected {m} interior values for n = {n}")

    @classmethod
    def from_function(cls, n: int, fn) -> "TriangleField":
        pts, _ = _tri_index(n)
        vec = np.asarray([fn(int(x), int(y)) for x, y in pts], dtype=np.float64)
        return cls(n, vec)

    def value(self, x: int, y: int) -> float:
        if not (0 <= x < y <= self.n):
            raise IndexError(f"triangle indices need 0 <= x < y <= {self.n}, got {(x, y)}")
        if x == 0 or y == self.n:
            return 0.0
        _, idx = _tri_index(self.n)
        return float(self.vec[idx[x, y]])

    def points(self) -> np.ndarray:
        return _tri_index(self.n)[0]

    def superdiagonal(self) -> np.ndarray:
        """Values at (x, x+1) for x = 1..n-2."""
        _, idx = _tri_index(self.n)
        xs = np.arange(1, self.n - 1)
        return self.vec[idx[xs, xs + 1]]

    def sup_norm(self) -> float:
        if self.vec.size == 0:
            return 0.0
        return float(np.max(np.abs(self.vec)))

    def grid(self) -> np.ndarray:
        """(n+1) x (n+1) array, zero outside the open triangle."""
        out = np.zeros((self.n + 1, self.n + 1))
        pts, _ = _tri_index(self.n)
        out[pts[:, 0], pts[:, 1]] = self.vec
        return out

    def copy(self) -> "TriangleField":
        return TriangleField(self.n, self.vec.copy())


@lru_cache(maxsize=16)
def _tri_operator(n: int):
    pts, idx = _tri_index(n)
    m = pts.shape[0]
    nsq = float(n * n)
    rows, cols, vals = [], [], []
    for p in range(m):
        x, y = pts[p]
        if y - x == 1:
            nbrs = ((x - 1, y), (x, y + 1))
            diag = -2.0 * nsq
        else:
            nbrs = ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
            diag = -4.0 * nsq
        rows.append(p)
        cols.append(p)
        vals.append(diag)
        for qx, qy in nbrs:
            q = idx[qx, qy]
            if q >= 0:
                rows.append(p)
                cols.append(q)
                vals.append(nsq)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    xs = np.arange(1, n - 1)
    superdiag = idx[xs, xs + 1]
    return a, superdiag


def triangle_laplacian_matrix(n: int) -> sp.csr_matrix:
    """Sparse matrix of the triangle Laplacian on the packed interior."""
    return _tri_operator(n)[0].copy()


def laplacian_triangle(f: TriangleField) -> TriangleField:
    a, _ = _tri_operator(f.n)
    return TriangleField(f.n, a @ f.vec)


def superdiagonal_indicator(n: int) -> np.ndarray:
    """Packed vector that is 1 exactly at the points (x, x+1)."""
    a, superdiag = _tri_operator(n)
    out = np.zeros(a.shape[0])
    out[superdiag] = 1.0
    return out


def solve_green_triangle(n: int, c: float, rtol: float = 1e-12) -> TriangleField:
    """Solve -Lap f = c on the superdiagonal, 0 elsewhere, f = 0 on the edge.

    Conjugate gradient with diagonal preconditioning on the positive
    definite operator -Lap; the relative residual is verified after the
    solve and a SolverError carries it on failure.
    """
    if n < 3:
        raise ValueError("the triangle is empty for n < 3")
    a, superdiag = _tri_operator(n)
    b = np.zeros(a.shape[0])
    b[superdiag] = c
    if not np.any(b):
        return TriangleField(n, np.zeros(a.shape[0]))
    pos = -a
    dinv = 1.0 / pos.diagonal()
    precond = spla.LinearOperator(pos.shape, matvec=lambda v: dinv * v)
    x, info = spla.cg(pos, b, rtol=rtol, atol=0.0, maxiter=50 * n, M=precond)
    res = float(np.linalg.norm(pos @ x - b) / np.linalg.norm(b))
    if info != 0 or res > 10.0 * rtol:
        raise SolverError(f"green solve did not converge: info={info}, rel residual={res:.3e}")
    return TriangleField(n, x)


def green_closed_form(n: int, c: float) -> TriangleField:
    """The field c/(n-1) (x/n) (1 - y/n) on the open triangle."""
    pts, _ = _tri_index(n)
    vec = c / (n - 1.0) * (pts[:, 0] / n) * (1.0 - pts[:, 1] / n)
    return TriangleField(n, vec)


@dataclass
class ParabolicReport:
    steps: int
    refinements: int
    refine_gap: float
    converged: bool
    sup_over_time: float


@lru_cache(maxsize=32)
def _implicit_factor(n: int, dt: float):
    a, _ = _tri_operator(n)
    m = sp.eye(a.shape[0], format="csc") - dt * a.tocsc()
    return m, spla.splu(m)


def _parabolic_run(n, h_vec, source_at, tau, steps, residual_tol):
    dt = tau / steps
    m, lu = _implicit_factor(n, dt)
    phi = h_vec.copy()
    sup = float(np.max(np.abs(phi))) if phi.size else 0.0
    for k in range(1, steps + 1):
        rhs = phi + dt * source_at(k * dt)
        phi = lu.solve(rhs)
        res = float(np.max(np.abs(m @ phi - rhs)))
        if res > residual_tol * max(1.0, float(np.max(np.abs(rhs)))):
            raise SolverError(f"implicit step residual {res:.3e} exceeds {residual_tol:.1e}")
        s = float(np.max(np.abs(phi)))
        if s > sup:
            sup = s
    return phi, sup


def solve_parabolic_triangle(h: TriangleField, source, tau: float, *,
                             steps: int = 1000, refine_tol: float = 1e-8,
                             max_refine: int = 4, residual_tol: float = 1e-10,
                             return_report: bool = False):
    """Implicit-Euler evolution d(phi)/dt = Lap phi + g on the triangle.

    source may be None, a packed vector (time constant), or a callable
    t -> packed vector.  The number of steps is doubled until two
    successive runs agree to refine_tol in sup norm or max_refine
    doublings were spent; the report carries the achieved gap.  The
    implicit matrix is an M-matrix for every dt, so the scheme obeys the
    same maximum principles and source bounds as the exact flow.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    n = h.n
    zero = np.zeros_like(h.vec)
    if source is None:
        source_at = lambda t: zero
    elif callable(source):
        source_at = lambda t: np.asarray(source(t), dtype=np.float64)
    else:
        const = np.asarray(source, dtype=np.float64)
        if const.shape != h.vec.shape:
            raise ValueError("constant source must be a packed interior vector")
        source_at = lambda t: const
    if tau == 0.0 or h.vec.size == 0:
        rep = ParabolicReport(0, 0, 0.0, True, float(np.max(np.abs(h.vec))) if h.vec.size else 0.0)
        return (h.copy(), rep) if return_report else h.copy()

    phi, sup = _parabolic_run(n, h.vec, source_at, tau, steps, residual_tol)
    gap = np.inf
    refinements = 0
    while refinements < max_refine:
        steps *= 2
        refinements += 1
        phi2, sup2 = _parabolic_run(n, h.vec, source_at, tau, steps, residual_tol)
        gap = float(np.max(np.abs(phi2 - phi)))
        phi, sup = phi2, max(sup, sup2)
        if gap < refine_tol:
            break
    report = ParabolicReport(steps, refinements, gap, gap < refine_tol, sup)
    out = TriangleField(n, phi)
    return (out, report) if return_report else out


@dataclass
class CorrelationReport:
    c0: float
    bound: float
    sup_over_time: float
    passed: bool
    parabolic: ParabolicReport = field(repr=False, default=None)


def correlation_evolution(h: TriangleField, p0: Profile1D, tau: float, *,
                          steps: int = 1000, max_refine: int = 2,
                          tolerance: float = 1e-9):
    """Two-point correlation field driven by the evolving density profile.

    The source is -(grad rho_t)^2 placed on the superdiagonal, with rho_t
    the heat evolution of p0; h is the initial correlation field.  Returns
    (field at tau, report).  The report checks the a-priori bound
    sup_t ||phi_t|| <= (2 C0 + C0^2) / (2 n) with
    C0 = max(sup |grad rho_0|, n sup |h|).
    """
    n = h.n
    if p0.n != n:
        raise ValueError("profile and field sizes disagree")
    grad0 = float(np.max(np.abs(discrete_gradient(p0))))
    c0 = max(grad0, n * h.sup_norm())
    bound = (2.0 * c0 + c0 * c0) / (2.0 * n)

    _, superdiag = _tri_operator(n)
    m = h.vec.shape[0]

    def make_source(n_steps):
        dt = tau / n_steps
        ts = dt * np.arange(1, n_steps + 1)
        inner = heat_profiles(p0, ts)                     # (steps, n-1)
        full = np.empty((n_steps, n + 1))
        full[:, 0] = p0.alpha
        full[:, -1] = p0.beta
        full[:, 1:-1] = inner
        grads = n * np.diff(full, axis=1)                 # (steps, n)
        sq = grads[:, 1:n - 1] ** 2                       # at bonds (x, x+1), x=1..n-2

        def source_at(t):
            k = min(int(round(t / dt)) - 1, n_steps - 1)
            out = np.zeros(m)
            out[superdiag] = -sq[k]
            return out

        return source_at

    # refinement is driven here so the source resolution follows the steps
    phi, sup = _parabolic_run(n, h.vec, make_source(steps), tau, steps, 1e-10)
    gap = np.inf
    refinements = 0
    while refinements < max_refine:
        steps *= 2
        refinements += 1
        phi2, sup2 = _parabolic_run(n, h.vec, make_source(steps), tau, steps, 1e-10)
        gap = float(np.max(np.abs(phi2 - phi)))
        phi, sup = phi2, max(sup, sup2)
        if gap < 1e-8:
            break
    parep = ParabolicReport(steps, refinements, gap, gap < 1e-8, sup)
    report = CorrelationReport(c0, bound, sup, sup <= bound + tolerance, parep)
    return TriangleField(n, phi), report
