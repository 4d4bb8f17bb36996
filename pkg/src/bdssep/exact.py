"""Exact finite-system reference computations via the dense generator.

States of the chain on sites 1..n-1 are encoded as integers whose bit
x-1 is the occupation of site x (little-endian by site).  The module
builds the full 2^(n-1) generator, solves for the stationary law by
dense LU with iterative refinement, and derives one- and two-point
stationary statistics.  This is the ground truth the samplers and the
lattice PDE solvers are checked against.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .pde import Profile1D, SolverError, TriangleField
from .process import BoundaryParams

N_MAX = 14


class CapacityError(ValueError):
    """System too large for the dense state-space representation."""


@dataclass
class DenseGenerator:
    n: int
    q: np.ndarray


@dataclass
class StationaryDistribution:
    n: int
    probs: np.ndarray
    residual: float


@lru_cache(maxsize=16)
def occupancy_table(n: int) -> np.ndarray:
    """(2^(n-1), n-1) array; row s, column x-1 is eta(x) in state s."""
    ns = n - 1
    states = np.arange(1 << ns, dtype=np.int64)
    return ((states[:, None] >> np.arange(ns)[None, :]) & 1).astype(np.uint8)


def build_generator_dense(n: int, bp: BoundaryParams) -> DenseGenerator:
    """Full generator matrix (microscopic rates, no N^2 speedup)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > N_MAX:
        raise CapacityError(f"dense generator limited to n <= {N_MAX}, got {n}")
    ns = n - 1
    size = 1 << ns
    states = np.arange(size, dtype=np.int64)
    q = np.zeros((size, size))
    occ = occupancy_table(n)
    for x in range(1, n - 1):  # bond (x, x+1), bits x-1 and x
        differ = occ[:, x - 1] != occ[:, x]
        flip = np.int64((1 << (x - 1)) | (1 << x))
        src = states[differ]
        q[src, src ^ flip] += 1.0
    left = np.where(occ[:, 0] == 0, bp.alpha, 1.0 - bp.alpha)
    q[states, states ^ 1] += left
    hi = np.int64(1 << (ns - 1))
    right = np.where(occ[:, ns - 1] == 0, bp.beta, 1.0 - bp.beta)
    q[states, states ^ hi] += right
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return DenseGenerator(n, q)


def stationary_distribution(gen: DenseGenerator) -> StationaryDistribution:
    """Solve nu Q = 0, sum nu = 1 by LU with refinement; lstsq fallback.

    Raises SolverError unless the residual max |nu Q| is at most 1e-10 and
    entries are above -1e-12 (tiny negatives are clipped).
    """
    q = gen.q
    size = q.shape[0]
    a = q.T.copy()
    a[0, :] = 1.0
    b = np.zeros(size)
    b[0] = 1.0
    nu = None
    try:
        lu, piv = scipy.linalg.lu_factor(a)
        nu = scipy.linalg.lu_solve((lu, piv), b)
        for _ in range(2):  # iterative refinement against the replaced system
            r = b - a @ nu
            nu = nu + scipy.linalg.lu_solve((lu, piv), r)
    except scipy.linalg.LinAlgError:
        nu = None
    if nu is None or not np.all(np.isfinite(nu)) or np.min(nu) < -1e-9:
        stacked = np.vstack([q.T, np.ones(size)])
        rhs = np.zeros(size + 1)
        rhs[-1] = 1.0
        nu = np.linalg.lstsq(stacked, rhs, rcond=None)[0]
    residual = float(np.max(np.abs(nu @ q)))
    min_entry = float(np.min(nu))
    if residual > 1e-10 or min_entry < -1e-12:
        raise SolverError(
            f"stationary solve failed: residual {residual:.3e}, min entry {min_entry:.3e}")
    nu = np.clip(nu, 0.0, None)
    nu /= nu.sum()
    return StationaryDistribution(gen.n, nu, residual)


def reversibility_defect(gen: DenseGenerator, sd: StationaryDistribution) -> float:
    """max |D Q - (D Q)^T| with D = diag(nu); zero iff detailed balance."""
    flow = sd.probs[:, None] * gen.q
    return float(np.max(np.abs(flow - flow.T)))


def exact_profile(sd: StationaryDistribution, bp: BoundaryParams) -> Profile1D:
    """Stationary site densities with the reservoir values attached."""
    occ = occupancy_table(sd.n).astype(np.float64)
    rho = sd.probs @ occ
    values = np.empty(sd.n + 1)
    values[0] = bp.alpha
    values[-1] = bp.beta
    values[1:-1] = rho
    return Profile1D(sd.n, values)


def exact_two_point(sd: StationaryDistribution) -> TriangleField:
    """Centered stationary two-point function on the open triangle."""
    occ = occupancy_table(sd.n).astype(np.float64)
    rho = sd.probs @ occ
    second = occ.T @ (sd.probs[:, None] * occ)
    cent = second - np.outer(rho, rho)
    out = TriangleField(sd.n)
    pts = out.points()
    if pts.size:
        out.vec = cent[pts[:, 0] - 1, pts[:, 1] - 1].copy()
    return out


@dataclass
class TwoPointShape:
    sigma: int
    scale_ratio: float
    max_abs_dev: float


def fit_two_point_shape(field: TriangleField, bp: BoundaryParams) -> TwoPointShape:
    """Compare a two-point field against s (x/n)(1 - y/n).

    The least-squares scale s determines the overall sign sigma; the
    reported deviation is against sigma (beta-alpha)^2/(n-1) (x/n)(1-y/n).
    For alpha = beta the predicted magnitude vanishes and sigma is 0.
    """
    n = field.n
    pts = field.points()
    shape = (pts[:, 0] / n) * (1.0 - pts[:, 1] / n) if pts.size else np.zeros(0)
    mag = (bp.beta - bp.alpha) ** 2 / (n - 1.0) if n > 1 else 0.0
    denom = float(np.dot(shape, shape))
    s = float(np.dot(field.vec, shape) / denom) if denom > 0.0 else 0.0
    if mag == 0.0 or abs(s) < 1e-13:
        sigma = 0
        ratio = 0.0
    else:
        sigma = 1 if s > 0 else -1
        ratio = abs(s) / mag
    dev = float(np.max(np.abs(field.vec - sigma * mag * shape))) if pts.size else 0.0
    return TwoPointShape(sigma, ratio, dev)


def state_bits(state: int, n: int) -> str:
    """Site-ordered bit string of a state (site 1 first)."""
    return "".join("1" if (state >> i) & 1 else "0" for i in range(n - 1))


def dump_distribution(sd: StationaryDistribution, path) -> None:
    """CSV dump with columns (state_bits, probability), 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_bits", "probability"])
        for s, p in enumerate(sd.probs):
            writer.writerow([state_bits(s, sd.n), format(p, ".17g")])
