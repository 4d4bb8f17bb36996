"""Galerkin simulation of the limiting Gaussian mode system.

The fluctuation field limits to an infinite-dimensional OU process; its
projection on the first J sine modes solves

    dZ = -Lam Z dt + S(t) dW,      S(t) S(t)^T = B(t),

with Lam = diag((j pi)^2) and B the mobility-weighted Gram matrix of the
mode gradients, B_jk(t) = 2 int chi(rho_t(u)) e_j'(u) e_k'(u) du.  For
the stationary (linear) profile B is constant and the invariant law is
the Lyapunov solution Sigma_jk = B_jk / (lam_j + lam_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (ContinuumProfile, _chi_poly, chi, eigenvalue,
                       gauss_legendre, poly_cosine_product)


def noise_covariance(j_max: int, alpha: float, beta: float) -> np.ndarray:
    """Noise covariance B for the stationary profile, in closed form."""
    a, b, c = _chi_poly(alpha, beta)
    j = np.arange(1, j_max + 1)
    out = np.empty((j_max, j_max))
    for r in range(j_max):
        for s in range(r, j_max):
            val = 2.0 * j[r] * j[s] * np.pi**2 * poly_cosine_product(j[r], j[s], a, b, c)
            out[r, s] = val
            out[s, r] = val
    return out


def noise_covariance_profile(profile: ContinuumProfile, t: float, j_max: int,
                             nodes: int = 256) -> np.ndarray:
    """Noise covariance at time t of an evolving profile, by quadrature."""
    u, w = gauss_legendre(nodes)
    rho = profile.density(t, u)
    cw = chi(rho) * w
    j = np.arange(1, j_max + 1)
    g = np.sqrt(2.0) * j[:, None] * np.pi * np.cos(np.pi * j[:, None] * u[None, :])
    return 2.0 * (g * cw) @ g.T


def lyapunov_stationary(b: np.ndarray) -> np.ndarray:
    """Solve Lam X + X Lam = B for diagonal Lam of sine eigenvalues."""
    b = np.asarray(b, dtype=np.float64)
    j_max = b.shape[0]
    lam = eigenvalue(np.arange(1, j_max + 1))
    return b / (lam[:, None] + lam[None, :])


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    if w.min() < -1e-10 * max(1.0, abs(w.max())):
        raise ValueError("matrix is not positive semidefinite")
    return (v * np.sqrt(np.clip(w, 0.0, None))[None, :]) @ v.T


@dataclass
class OUResult:
    times: np.ndarray              # (K+1,) recorded times
    paths: np.ndarray              # (n_paths, K+1, j_max)
    j_max: int
    dt: float                      # step actually used
    method: str
    seed: int

    def terminal_samples(self) -> np.ndarray:
        return self.paths[:, -1, :]


def simulate_ou(j_max: int, b, t_end: float, dt: float, n_paths: int, seed: int,
                *, init: str = "zero", init_cov: np.ndarray | None = None,
                record_stride: int = 1, method: str = "euler") -> OUResult:
    """Simulate n_paths trajectories of the J-mode system.

    b is either a constant (J, J) noise covariance or a callable t -> (J, J)
    (the Euler scheme then refreshes the noise square root each step).
    init is "zero", "stationary" (constant b only), or "gaussian" with an
    explicit init_cov.  The step shrinks automatically so that
    lam_J * dt <= 0.1; method "exact" uses the Gaussian transition kernel of
    the constant-b process and is unbiased at any step size.

    Noise is drawn from a Philox stream keyed by the seed, in step order as
    (n_paths, j_max) blocks: results are reproducible for fixed arguments
    but every path changes if n_paths changes.
    """
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and dt must be positive")
    if method not in ("euler", "exact"):
        raise ValueError("method must be 'euler' or 'exact'")
    time_dependent = callable(b)
    if time_dependent and method == "exact":
        raise ValueError("exact stepping needs a constant noise covariance")
    lam = eigenvalue(np.arange(1, j_max + 1))
    if method == "euler" and lam[-1] * dt > 0.1:
        dt = 0.1 / lam[-1]
    n_steps = max(int(np.ceil(t_end / dt - 1e-9)), 1)
    dt = t_end / n_steps
    if n_steps % record_stride != 0:
        raise ValueError("record_stride must divide the step count")

    if not time_dependent:
        b_mat = np.asarray(b, dtype=np.float64)
        if b_mat.shape != (j_max, j_max):
            raise ValueError("noise covariance has the wrong shape")

    rng = np.random.Generator(np.random.Philox(key=seed))
    z = np.zeros((n_paths, j_max))
    if init == "stationary":
        if time_dependent:
            raise ValueError("stationary init needs a constant noise covariance")
        init_cov = lyapunov_stationary(b_mat)
        init = "gaussian"
    if init == "gaussian":
        if init_cov is None:
            raise ValueError("gaussian init requires init_cov")
        s0 = _sqrt_psd(np.asarray(init_cov, dtype=np.float64))
        z = rng.standard_normal((n_paths, j_max)) @ s0.T
    elif init != "zero":
        raise ValueError("init must be 'zero', 'gaussian' or 'stationary'")

    n_rec = n_steps // record_stride
    times = dt * record_stride * np.arange(n_rec + 1)
    paths = np.empty((n_paths, n_rec + 1, j_max))
    paths[:, 0, :] = z

    if method == "exact":
        decay = np.exp(-lam * dt)
        q = b_mat * (1.0 - np.exp(-(lam[:, None] + lam[None, :]) * dt)) \
            / (lam[:, None] + lam[None, :])
        sq = _sqrt_psd(q)
        for k in range(1, n_steps + 1):
            z = z * decay[None, :] + rng.standard_normal((n_paths, j_max)) @ sq.T
            if k % record_stride == 0:
                paths[:, k // record_stride, :] = z
        return OUResult(times, paths, j_max, dt, method, seed)

    root_dt = np.sqrt(dt)
    if not time_dependent:
        s = _sqrt_psd(b_mat)
    for k in range(1, n_steps + 1):
        if time_dependent:
            s = _sqrt_psd(np.asarray(b((k - 1) * dt), dtype=np.float64))
        noise = rng.standard_normal((n_paths, j_max)) @ s.T
        z = z - dt * (lam[None, :] * z) + root_dt * noise
        if k % record_stride == 0:
            paths[:, k // record_stride, :] = z
    return OUResult(times, paths, j_max, dt, method, seed)
