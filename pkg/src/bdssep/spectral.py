"""Continuum sine-basis toolbox on [0, 1] with Dirichlet boundary.

Basis e_j(u) = sqrt(2) sin(j pi u), Laplacian eigenvalues (j pi)^2, heat
semigroup acting diagonally on mode vectors.  The closed-form integrals
of quadratic polynomials against products of basis functions feed both
the stationary covariance of density fluctuations and the noise
covariance of the limiting Ornstein-Uhlenbeck dynamics; an independent
Gauss-Legendre path cross-checks them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Adaptive integration failed to reach the requested tolerance."""


def chi(rho):
    """Static compressibility rho (1 - rho)."""
    rho = np.asarray(rho, dtype=np.float64)
    out = rho * (1.0 - rho)
    return float(out) if out.ndim == 0 else out


def eigenvalue(j):
    """Dirichlet Laplacian eigenvalue (j pi)^2; broadcasts over j."""
    j = np.asarray(j)
    if np.any(j < 1):
        raise ValueError("mode index must be >= 1")
    out = (j * np.pi) ** 2.0
    return float(out) if out.ndim == 0 else out


def basis(j: int, u):
    """e_j(u) = sqrt(2) sin(j pi u)."""
    if j < 1:
        raise ValueError("mode index must be >= 1")
    return np.sqrt(2.0) * np.sin(j * np.pi * np.asarray(u, dtype=np.float64))


def semigroup_apply(t: float, coeffs: np.ndarray) -> np.ndarray:
    """Heat semigroup in mode space: c_j -> exp(-(j pi)^2 t) c_j."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    j = np.arange(1, coeffs.shape[0] + 1)
    return coeffs * np.exp(-((j * np.pi) ** 2) * t)


def inverse_laplacian(coeffs: np.ndarray) -> np.ndarray:
    """Solve -u'' = f with Dirichlet boundary, in mode space."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    j = np.arange(1, coeffs.shape[0] + 1)
    return coeffs / (j * np.pi) ** 2


def green_kernel(u, v):
    """Kernel of the inverse Dirichlet Laplacian: min(u,v)(1 - max(u,v))."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    out = np.minimum(u, v) * (1.0 - np.maximum(u, v))
    return float(out) if out.ndim == 0 else out


def sobolev_norm(coeffs: np.ndarray, k: float, sign: int = 1) -> float:
    """Weighted mode norm (sum (j pi)^(2 sign k) c_j^2)^(1/2)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    j = np.arange(1, coeffs.shape[0] + 1)
    return float(np.sqrt(np.sum((j * np.pi) ** (2.0 * sign * k) * coeffs**2)))


@lru_cache(maxsize=8)
def gauss_legendre(n: int = 64):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# closed-form integrals of (a + b u + c u^2) against trigonometric products

def _cos_moment(q: int):
    """(I0, I1, I2) with Im = integral of u^m cos(q pi u) on [0, 1]."""
    if q == 0:
        return 1.0, 0.5, 1.0 / 3.0
    qq = (q * np.pi) ** 2
    sgn = -1.0 if q % 2 else 1.0
    return 0.0, (sgn - 1.0) / qq, 2.0 * sgn / qq


def _poly_eval_moment(q, a, b, c):
    i0, i1, i2 = _cos_moment(q)
    return a * i0 + b * i1 + c * i2


def poly_sine_product(j: int, k: int, a: float, b: float, c: float) -> float:
    """Integral of (a + b u + c u^2) e_j(u) e_k(u) over [0, 1], exactly."""
    return (_poly_eval_moment(abs(j - k), a, b, c)
            - _poly_eval_moment(j + k, a, b, c))


def poly_cosine_product(j: int, k: int, a: float, b: float, c: float) -> float:
    """Integral of (a + b u + c u^2) 2 cos(j pi u) cos(k pi u) over [0, 1]."""
    return (_poly_eval_moment(abs(j - k), a, b, c)
            + _poly_eval_moment(j + k, a, b, c))


def _chi_poly(alpha: float, beta: float):
    # chi(alpha + (beta - alpha) u) as a quadratic a + b u + c u^2
    d = beta - alpha
    return alpha * (1.0 - alpha), d * (1.0 - 2.0 * alpha), -d * d


def stationary_covariance(j: int, k: int, alpha: float, beta: float) -> float:
    """Limiting stationary covariance of the modes (e_j, e_k).

    Local-equilibrium part int chi(rho_bar) e_j e_k minus the long-range
    correction (beta - alpha)^2 delta_jk / (j pi)^2, both in closed form.
    """
    a, b, c = _chi_poly(alpha, beta)
    val = poly_sine_product(j, k, a, b, c)
    if j == k:
        val -= (beta - alpha) ** 2 / (j * np.pi) ** 2
    return val


def stationary_covariance_quadrature(j: int, k: int, alpha: float, beta: float,
                                     nodes: int = 64) -> float:
    """Same quantity with the local part done by Gauss-Legendre quadrature."""
    u, w = gauss_legendre(nodes)
    rho = alpha + (beta - alpha) * u
    val = float(np.sum(w * chi(rho) * basis(j, u) * basis(k, u)))
    if j == k:
        val -= (beta - alpha) ** 2 / (j * np.pi) ** 2
    return val


def stationary_covariance_matrix(j_max: int, alpha: float, beta: float) -> np.ndarray:
    out = np.empty((j_max, j_max))
    for j in range(1, j_max + 1):
        for k in range(1, j_max + 1):
            out[j - 1, k - 1] = stationary_covariance(j, k, alpha, beta)
    return out


# ---------------------------------------------------------------------------
# evolving density profiles

@dataclass
class ContinuumProfile:
    """Initial density on [0, 1] stored as modes of rho_0 - rho_bar.

    coeffs[n-1] is the e_n coefficient of the deviation from the linear
    interpolation rho_bar between alpha and beta; tail is an upper
    estimate of the sup-norm truncation error of the representation.
    """

    alpha: float
    beta: float
    coeffs: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        grid = np.linspace(0.0, 1.0, 257)
        rho = self.density(0.0, grid)
        if np.any(rho < -1e-8) or np.any(rho > 1.0 + 1e-8):
            raise ValueError("reconstructed density leaves [0, 1]")

    @classmethod
    def stationary(cls, alpha: float, beta: float) -> "ContinuumProfile":
        return cls(alpha, beta, np.zeros(1))

    @classmethod
    def from_function(cls, fn, j_max: int = 64, nodes: int = 1024) -> "ContinuumProfile":
        alpha = float(fn(0.0))
        beta = float(fn(1.0))
        u, w = gauss_legendre(nodes)
        dev = np.asarray([fn(x) for x in u], dtype=np.float64) - (alpha + (beta - alpha) * u)
        j = np.arange(1, 2 * j_max + 1)
        modes = np.sqrt(2.0) * np.sin(np.pi * np.outer(j, u))
        all_coeffs = modes @ (w * dev)
        tail = float(np.sqrt(2.0) * np.sum(np.abs(all_coeffs[j_max:])))
        return cls(alpha, beta, all_coeffs[:j_max], tail)

    def density(self, t, u):
        """rho(t, u); broadcasts over array t (rows) and u (columns)."""
        u = np.asarray(u, dtype=np.float64)
        scalar_u = u.ndim == 0
        uu = np.atleast_1d(u)
        t_arr = np.asarray(t, dtype=np.float64)
        j = np.arange(1, self.coeffs.shape[0] + 1)
        lam = (j * np.pi) ** 2
        e = np.sqrt(2.0) * np.sin(np.pi * np.outer(j, uu))
        base = self.alpha + (self.beta - self.alpha) * uu
        if t_arr.ndim == 0:
            out = base + (self.coeffs * np.exp(-lam * float(t_arr))) @ e
            return float(out[0]) if scalar_u else out
        out = base[None, :] + (self.coeffs[None, :] * np.exp(-np.outer(t_arr, lam))) @ e
        return out[:, 0] if scalar_u else out


# ---------------------------------------------------------------------------
# adaptive Simpson in time

def _simpson(a, fa, fb, fm, b):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 30) -> float:
    """Standard adaptive Simpson with Richardson acceptance."""
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(a, fa, fb, fm, b)

    def rec(a, fa, b, fb, m, fm, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(a, fa, fm, flm, m)
        right = _simpson(m, fm, fb, frm, b)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson stalled at depth {depth}, local error {abs(delta):.2e}")
        return (rec(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1)
                + rec(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1))

    return rec(a, fa, b, fb, m, fm, whole, tol, 0)


def dynamic_covariance(t: float, s: float, j: int, k: int,
                       profile: ContinuumProfile, tol: float = 1e-10,
                       nodes: int = 128) -> float:
    """Covariance E[Y_t(e_j) Y_s(e_k)] of the density fluctuation field.

    Initial-data part chi(rho_0) propagated by the semigroup plus the
    accumulated noise term
    2 int_0^s dr int_0^1 chi(rho(r, u)) (grad T_{t-r} e_j)(grad T_{s-r} e_k) du,
    with the space integral by Gauss-Legendre and the time integral by
    adaptive Simpson to the requested tolerance.
    """
    if t < s:
        t, s, j, k = s, t, k, j
    if s < 0.0:
        raise ValueError("times must be nonnegative")
    lj = eigenvalue(j)
    lk = eigenvalue(k)
    u, w = gauss_legendre(nodes)
    ej = basis(j, u)
    ek = basis(k, u)
    cj = np.sqrt(2.0) * j * np.pi * np.cos(j * np.pi * u)
    ck = np.sqrt(2.0) * k * np.pi * np.cos(k * np.pi * u)
    rho0 = profile.density(0.0, u)
    part1 = np.exp(-lj * t - lk * s) * float(np.sum(w * chi(rho0) * ej * ek))
    if s == 0.0:
        return part1

    wck = w * cj * ck

    def integrand(r):
        rho = profile.density(r, u)
        return np.exp(-lj * (t - r) - lk * (s - r)) * float(np.sum(wck * chi(rho)))

    part2 = 2.0 * adaptive_simpson(integrand, 0.0, s, tol)
    return part1 + part2
