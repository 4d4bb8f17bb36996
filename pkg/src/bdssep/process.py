"""Boundary-driven symmetric simple exclusion process on {1, ..., N-1}.

Bulk dynamics: each bond (x, x+1) carries an exchange clock of rate 1 that
fires only when the two occupations differ.  Boundary dynamics: site 1
flips at rate ``alpha*(1 - eta(1)) + (1 - alpha)*eta(1)`` and site N-1 at
rate ``beta*(1 - eta(N-1)) + (1 - beta)*eta(N-1)``.  Time is measured
either in microscopic units or diffusively rescaled by N^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._rng import RandomStream


@dataclass(frozen=True)
class BoundaryParams:
    """Reservoir densities alpha (left) and beta (right), both in [0, 1]."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


@dataclass
class LatticeConfig:
    """Occupation variables on sites 1..n-1; occ[i] is the value at x = i + 1."""

    n: int
    occ: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        self.occ = np.ascontiguousarray(self.occ, dtype=np.uint8)
        if self.occ.shape != (self.n - 1,):
            raise ValueError(f"occ must have length n - 1 = {self.n - 1}")
        if np.any(self.occ > 1):
            raise ValueError("occupations must be 0 or 1")

    def copy(self) -> "LatticeConfig":
        return LatticeConfig(self.n, self.occ.copy())

    def particle_count(self) -> int:
        return int(self.occ.sum())


@dataclass(frozen=True)
class SimClock:
    """A point in simulation time; diffusive_time == micro_time / n^2 exactly."""

    micro_time: float
    diffusive_time: float

    @classmethod
    def from_micro(cls, micro_time: float, n: int) -> "SimClock":
        return cls(micro_time, micro_time / (n * n))

    @classmethod
    def from_diffusive(cls, tau: float, n: int) -> "SimClock":
        return cls(tau * n * n, tau)


class AbsorbingStateError(RuntimeError):
    """Raised when a step is requested from a configuration with no events."""


def event_rates(config: LatticeConfig, bp: BoundaryParams):
    """List the currently possible events with their rates.

    Returns a list of ``(event, rate)`` pairs with ``rate > 0``.  Events are
    ``("swap", x)`` for the exchange on bond (x, x+1), ``("left-flip", 1)``
    and ``("right-flip", n - 1)``, in that order (bonds by increasing x).
    """
    occ = config.occ
    n = config.n
    events = []
    for x in range(1, n - 1):
        if occ[x - 1] != occ[x]:
            events.append((("swap", x), 1.0))
    rl = bp.alpha if occ[0] == 0 else 1.0 - bp.alpha
    if rl > 0.0:
        events.append((("left-flip", 1), rl))
    rr = bp.beta if occ[n - 2] == 0 else 1.0 - bp.beta
    if rr > 0.0:
        events.append((("right-flip", n - 1), rr))
    return events


def _scratch(ns: int):
    active = np.empty(max(ns - 1, 1), dtype=np.int64)
    pos = np.empty(max(ns - 1, 1), dtype=np.int64)
    return active, pos


def kmc_step(config: LatticeConfig, bp: BoundaryParams, rng: RandomStream):
    """One exact continuous-time step.

    Returns ``(new_config, dt_micro)`` where dt_micro is the exponential
    waiting time in microscopic units.  Raises AbsorbingStateError if no
    event has positive rate (possible only for degenerate alpha, beta).
    """
    new = config.copy()
    active, pos = _scratch(new.n - 1)
    n_act = _kernels.build_active(new.occ, active, pos)
    dt, code, _ = _kernels.single_step(new.occ, active, pos, n_act,
                                       bp.alpha, bp.beta, rng.state)
    if code == _kernels.ABSORBED:
        raise AbsorbingStateError("no event has positive rate in this configuration")
    return new, dt


def evolve(config: LatticeConfig, bp: BoundaryParams, tau: float,
           rng: RandomStream, return_status: bool = False):
    """Evolve for a diffusive time tau (micro time tau * n^2).

    The state returned is the one holding at the horizon; an event whose
    waiting time straddles the horizon is not applied.  If the chain hits
    an absorbing configuration it stays there; ``return_status=True``
    additionally returns 1 in that case and 0 otherwise.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    new = config.copy()
    active, pos = _scratch(new.n - 1)
    n_act = _kernels.build_active(new.occ, active, pos)
    horizon = SimClock.from_diffusive(tau, new.n).micro_time
    _, status = _kernels.evolve_span(new.occ, active, pos, n_act,
                                     bp.alpha, bp.beta, rng.state, 0.0, horizon)
    if return_status:
        return new, int(status)
    return new


def sample_product(profile, rng: RandomStream, n: int | None = None) -> LatticeConfig:
    """Sample a product measure whose site-x marginal is profile(x).

    profile may be a Profile1D (interior values are used) or an array of
    length n - 1 of probabilities.  Draws one uniform per site, in site
    order, from the given stream; the ensemble kernels consume the stream
    identically.
    """
    if hasattr(profile, "values") and hasattr(profile, "n"):
        p = np.asarray(profile.values[1:-1], dtype=np.float64)
        n = profile.n
    else:
        p = np.asarray(profile, dtype=np.float64)
        if n is None:
            n = p.shape[0] + 1
    if p.shape != (n - 1,):
        raise ValueError("profile must supply n - 1 interior probabilities")
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    occ = _kernels.sample_product_kernel(p, rng.state)
    return LatticeConfig(n, occ)


def gamma_field(config: LatticeConfig, bp: BoundaryParams, h) -> float:
    """Carre du champ of the projected field for test function h.

    h is a callable on [0, 1] or an array of values at x/n for x = 0..n.
    The value is the sum over events of rate times squared field jump,
    N^2 { L(Y^2) - 2 Y L(Y) }, written with the discrete gradient
    grad h(u) = n (h(u + 1/n) - h(u)):

    * bonds:      (1/n) sum_x (eta(x+1) - eta(x))^2 grad_h(x/n)^2
    * boundaries: (1/n) grad_h(0)^2 r_left + (1/n) grad_h((n-1)/n)^2 r_right

    with r_left, r_right the actual flip rates of sites 1 and n-1.
    """
    n = config.n
    hv = _h_values(h, n)
    occ = config.occ.astype(np.float64)
    grad = n * np.diff(hv)  # grad[x] at u = x/n, x = 0..n-1
    val = 0.0
    if n > 2:
        jumps = np.diff(occ)
        val += float(np.sum(jumps * jumps * grad[1:n - 1] ** 2)) / n
    rl = bp.alpha if config.occ[0] == 0 else 1.0 - bp.alpha
    rr = bp.beta if config.occ[n - 2] == 0 else 1.0 - bp.beta
    val += grad[0] ** 2 * rl / n
    val += grad[n - 1] ** 2 * rr / n
    return val


def _h_values(h, n: int) -> np.ndarray:
    if callable(h):
        return np.asarray([h(x / n) for x in range(n + 1)], dtype=np.float64)
    hv = np.asarray(h, dtype=np.float64)
    if hv.shape != (n + 1,):
        raise ValueError(f"h must have n + 1 = {n + 1} grid values")
    return hv
