"""Fluctuation fields and replica statistics for the exclusion process.

The density fluctuation field pairs a configuration with a mode of the
sine basis: Y(e_j) = n^(-1/2) sum_x e_j(x/n) (eta(x) - centering(x)).
Ensembles of independent replicas are generated by the kernels in
:mod:`bdssep._kernels`; each replica draws from the stream keyed by
(seed, replica), so estimates are reproducible and do not depend on the
worker count.  Statistical reductions use numpy pairwise summation over
fixed-order replica arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .pde import Profile1D, heat_profiles
from .process import BoundaryParams, LatticeConfig


@lru_cache(maxsize=32)
def _mode_weights(n: int, j_max: int):
    x = np.arange(1, n) / n
    j = np.arange(1, j_max + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(j, x)) / np.sqrt(n)


def project_field(config: LatticeConfig, centering, j_max: int) -> np.ndarray:
    """Mode projections Y(e_1..e_jmax) of a single configuration.

    centering is a Profile1D (interior used) or an array of length n - 1.
    """
    n = config.n
    if hasattr(centering, "values"):
        cent = np.asarray(centering.values[1:-1], dtype=np.float64)
    else:
        cent = np.asarray(centering, dtype=np.float64)
    if cent.shape != (n - 1,):
        raise ValueError("centering must supply n - 1 interior values")
    w = _mode_weights(n, j_max)
    return w @ (config.occ.astype(np.float64) - cent)


@dataclass
class EnsembleSpec:
    """Parameters of a replica ensemble.

    init = "stationary": start from the product measure at the linear
    profile and discard a burn-in of burn_in diffusive time units; the
    observation times then count from the end of the burn-in and the
    centering is the linear profile.  init = "product": start from the
    product measure at ``initial`` (Profile1D or callable on [0, 1]) with
    no burn-in; the centering at each observation time is the discrete
    heat evolution of the initial profile.

    samples_per_replica > 1 (stationary init, single observation time)
    records additional thinned samples ``thin`` apart along each replica;
    these are autocorrelated, which plain SE formulas ignore.  Meant for
    performance comparisons only.
    """

    n: int
    bp: BoundaryParams
    replicas: int
    times: tuple
    seed: int
    modes: int = 8
    init: str = "stationary"
    initial: object = None
    burn_in: float = 1.0
    samples_per_replica: int = 1
    thin: float = 0.5

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        self.times = tuple(float(t) for t in self.times)
        if any(t < 0 for t in self.times) or list(self.times) != sorted(self.times):
            raise ValueError("times must be nonnegative and ascending")
        if self.init not in ("stationary", "product"):
            raise ValueError("init must be 'stationary' or 'product'")
        if self.init == "product" and self.initial is None:
            raise ValueError("product init requires an initial profile")
        if self.burn_in < 0 or self.thin <= 0 or self.samples_per_replica < 1:
            raise ValueError("bad burn_in / thin / samples_per_replica")
        if self.samples_per_replica > 1 and (self.init != "stationary" or len(self.times) != 1):
            raise ValueError("thinned sampling needs stationary init and a single time")


@dataclass
class EnsembleResult:
    spec: EnsembleSpec
    times: np.ndarray
    occupations: np.ndarray        # (replicas, T, n-1) uint8
    fields: np.ndarray             # (replicas, T, modes)
    centerings: np.ndarray         # (T, n-1)
    status: np.ndarray = field(repr=False, default=None)

    def samples_at(self, t_index: int) -> np.ndarray:
        """(replicas, modes) field samples at one observation time."""
        return self.fields[:, t_index, :]


def _initial_profile(spec: EnsembleSpec) -> Profile1D:
    if spec.init == "stationary":
        return Profile1D.linear(spec.n, spec.bp.alpha, spec.bp.beta)
    initial = spec.initial
    if isinstance(initial, Profile1D):
        if initial.n != spec.n:
            raise ValueError("initial profile has the wrong size")
        return initial
    if callable(initial):
        return Profile1D.from_function(spec.n, initial)
    return Profile1D(spec.n, np.asarray(initial, dtype=np.float64))


def run_ensemble(spec: EnsembleSpec) -> EnsembleResult:
    """Simulate the ensemble and project the fields at every observation."""
    n = spec.n
    p0 = _initial_profile(spec)
    nsq = float(n * n)
    if spec.init == "stationary":
        if spec.samples_per_replica > 1:
            rel = spec.burn_in + spec.times[0] + spec.thin * np.arange(spec.samples_per_replica)
        else:
            rel = spec.burn_in + np.asarray(spec.times)
        obs_micro = nsq * rel
        obs_times = rel - spec.burn_in
    else:
        obs_micro = nsq * np.asarray(spec.times)
        obs_times = np.asarray(spec.times)
    n_obs = obs_micro.shape[0]
    occ = np.empty((spec.replicas, n_obs, n - 1), dtype=np.uint8)
    status = np.empty(spec.replicas, dtype=np.uint8)
    _kernels.ensemble_snapshots(spec.bp.alpha, spec.bp.beta,
                                np.ascontiguousarray(p0.values[1:-1]),
                                np.ascontiguousarray(obs_micro, dtype=np.float64),
                                spec.seed, occ, status)
    if spec.init == "stationary":
        centerings = np.repeat(p0.values[1:-1][None, :], n_obs, axis=0)
    else:
        centerings = heat_profiles(p0, obs_times)
    w = _mode_weights(n, spec.modes)
    fields = np.empty((spec.replicas, n_obs, spec.modes))
    for t in range(n_obs):
        fields[:, t, :] = (occ[:, t, :].astype(np.float64) - centerings[t]) @ w.T
    return EnsembleResult(spec, np.asarray(obs_times, dtype=np.float64),
                          occ, fields, centerings, status)


# ---------------------------------------------------------------------------
# reductions

@dataclass
class CovarianceEstimate:
    matrix: np.ndarray
    se: np.ndarray
    count: int


def estimate_covariance(samples: np.ndarray) -> CovarianceEstimate:
    """Unbiased sample covariance with elementwise standard errors.

    The SE of entry (j, k) comes from the delta method: the variance of
    the sample covariance is (m22 - c^2)/count with m22 the sample mean
    of d_j^2 d_k^2 over centered samples d.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("need a (count, modes) array with count >= 2")
    count = samples.shape[0]
    d = samples - samples.mean(axis=0, keepdims=True)
    cov = d.T @ d / (count - 1)
    m22 = (d**2).T @ (d**2) / count
    var = np.maximum(m22 - cov**2, 0.0) / count
    return CovarianceEstimate(cov, np.sqrt(var), count)


@dataclass
class GaussianityReport:
    count: int
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    z_skewness: np.ndarray
    z_kurtosis: np.ndarray
    flagged: np.ndarray
    threshold: float = 4.0


def gaussianity_check(samples: np.ndarray, threshold: float = 4.0) -> GaussianityReport:
    """Per-mode skewness and excess kurtosis with normal-theory z-scores."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    count = samples.shape[0]
    if count < 1000:
        raise ValueError("gaussianity check needs at least 1000 samples")
    d = samples - samples.mean(axis=0, keepdims=True)
    m2 = np.mean(d**2, axis=0)
    m3 = np.mean(d**3, axis=0)
    m4 = np.mean(d**4, axis=0)
    g1 = m3 / m2**1.5
    g2 = m4 / m2**2 - 3.0
    nn = float(count)
    se_g1 = np.sqrt(6.0 * nn * (nn - 1.0) / ((nn - 2.0) * (nn + 1.0) * (nn + 3.0)))
    se_g2 = 2.0 * se_g1 * np.sqrt((nn * nn - 1.0) / ((nn - 3.0) * (nn + 5.0)))
    z1 = g1 / se_g1
    z2 = g2 / se_g2
    flagged = (np.abs(z1) > threshold) | (np.abs(z2) > threshold)
    return GaussianityReport(count, g1, g2, z1, z2, flagged, threshold)


# ---------------------------------------------------------------------------
# martingale decomposition along trajectories

@dataclass
class MartingaleRecord:
    n: int
    bp: BoundaryParams
    modes: int
    grid: np.ndarray                       # diffusive times from 0 (K+1,)
    y: np.ndarray                          # (R, K+1, modes)
    drift_int: np.ndarray                  # integral of Y(lap e_j) ds
    gamma_int: np.ndarray                  # integral of Gamma(e_j) ds
    gamma_boundary_int: np.ndarray         # boundary part of the above
    status: np.ndarray = field(repr=False, default=None)


def record_martingale(n: int, bp: BoundaryParams, t_end: float, replicas: int,
                      seed: int, modes: int = 4, dt_record: float | None = None,
                      burn_in: float = 1.0) -> MartingaleRecord:
    """Stationary-mode trajectories with pathwise drift and Gamma integrals.

    Along each replica the kernel accumulates, exactly between events, the
    integrals of Y_s(lap e_j) and of Gamma(e_j) in diffusive time, and
    records them with the field values on a uniform grid of spacing
    dt_record (default t_end / 100).
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if dt_record is None:
        dt_record = t_end / 100.0
    k_steps = int(round(t_end / dt_record))
    if abs(k_steps * dt_record - t_end) > 1e-12 * max(1.0, t_end) or k_steps < 1:
        raise ValueError("dt_record must divide t_end")
    grid = np.linspace(0.0, t_end, k_steps + 1)
    nsq = float(n * n)
    burn_micro = burn_in * nsq
    grid_micro = burn_micro + grid * nsq

    lin = Profile1D.linear(n, bp.alpha, bp.beta)
    cent = np.ascontiguousarray(lin.values[1:-1])
    u_full = np.arange(n + 1) / n
    j = np.arange(1, modes + 1)
    e_full = np.sqrt(2.0) * np.sin(np.pi * np.outer(j, u_full))   # (J, n+1)
    rootn = np.sqrt(n)
    w_y = np.ascontiguousarray(e_full[:, 1:-1] / rootn)
    lap = nsq * (e_full[:, 2:] + e_full[:, :-2] - 2.0 * e_full[:, 1:-1])
    w_s = np.ascontiguousarray(lap / rootn)
    grad = n * np.diff(e_full, axis=1)                            # (J, n) at u = x/n
    w_bond = np.ascontiguousarray(grad[:, 1:n - 1] ** 2 / n)
    w_left = np.ascontiguousarray(grad[:, 0] ** 2 / n)
    w_right = np.ascontiguousarray(grad[:, n - 1] ** 2 / n)

    shape = (replicas, k_steps + 1, modes)
    out_y = np.empty(shape)
    out_si = np.empty(shape)
    out_gi = np.empty(shape)
    out_gb = np.empty(shape)
    status = np.empty(replicas, dtype=np.uint8)
    _kernels.ensemble_martingale(bp.alpha, bp.beta, cent, burn_micro,
                                 np.ascontiguousarray(grid_micro), seed, cent,
                                 w_y, w_s, w_bond, w_left, w_right,
                                 out_y, out_si, out_gi, out_gb, status)
    return MartingaleRecord(n, bp, modes, grid, out_y, out_si, out_gi, out_gb, status)


@dataclass
class MartingaleReport:
    mode: int
    z_increment: float
    qv_ratio: float
    qv_ratio_se: float
    boundary_share: float
    replicas: int


def martingale_diagnostic(record: MartingaleRecord, j: int) -> MartingaleReport:
    """Zero-mean and quadratic-variation checks for mode j.

    M_t = Y_t - Y_0 - int_0^t Y_s(lap e_j) ds should be a mean-zero
    martingale whose realized quadratic variation over the record grid
    matches the accumulated Gamma integral on average.
    """
    if not 1 <= j <= record.modes:
        raise ValueError("mode index out of range")
    c = j - 1
    y = record.y[:, :, c]
    m = y - y[:, :1] - record.drift_int[:, :, c]
    final = m[:, -1]
    reps = final.shape[0]
    z = float(final.mean() / (final.std(ddof=1) / np.sqrt(reps)))
    qv = np.sum(np.diff(m, axis=1) ** 2, axis=1)
    gam = record.gamma_int[:, -1, c]
    qbar = float(qv.mean())
    gbar = float(gam.mean())
    ratio = qbar / gbar
    vq = qv.var(ddof=1) / reps
    vg = gam.var(ddof=1) / reps
    cqg = float(np.cov(qv, gam, ddof=1)[0, 1]) / reps
    se = float(np.sqrt(max(vq / gbar**2 + qbar**2 * vg / gbar**4
                           - 2.0 * qbar * cqg / gbar**3, 0.0)))
    share = float(record.gamma_boundary_int[:, -1, c].mean() / gbar)
    return MartingaleReport(j, z, ratio, se, share, reps)
