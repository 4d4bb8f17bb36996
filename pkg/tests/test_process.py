"""Exact-simulation checks: rates, step law, product sampling, carre du champ."""

import numpy as np
import pytest

from bdssep._rng import RandomStream
from bdssep import _kernels
from bdssep.pde import Profile1D, solve_heat_1d
from bdssep.process import (AbsorbingStateError, BoundaryParams, LatticeConfig,
                            SimClock, event_rates, evolve, gamma_field, kmc_step,
                            sample_product)


def cfg(*bits):
    return LatticeConfig(len(bits) + 1, np.array(bits, dtype=np.uint8))


def test_event_rates_single_site():
    # both reservoirs act on the single site of the N=2 chain
    rates = event_rates(cfg(0), BoundaryParams(0.3, 0.6))
    assert rates == [(("left-flip", 1), 0.3), (("right-flip", 1), 0.6)]


def test_event_rates_interior_swaps():
    rates = event_rates(cfg(1, 0, 1), BoundaryParams(0.0, 1.0))
    assert rates == [(("swap", 1), 1.0), (("swap", 2), 1.0), (("left-flip", 1), 1.0)]


def test_event_rates_absorbing_empty():
    assert event_rates(cfg(1, 1, 1), BoundaryParams(1.0, 1.0)) == []


def test_rate_bookkeeping_n3():
    # out-rate of (1, 0): one active swap, left flip (1 - a), right flip b
    a, b = 0.2, 0.55
    rates = dict(event_rates(cfg(1, 0), BoundaryParams(a, b)))
    assert rates[("swap", 1)] == 1.0
    assert rates[("left-flip", 1)] == pytest.approx(1 - a)
    assert rates[("right-flip", 2)] == pytest.approx(b)
    assert sum(rates.values()) == pytest.approx(1 + (1 - a) + b)


def test_kmc_step_forced_transition():
    rng = RandomStream(11)
    out, dt = kmc_step(cfg(0), BoundaryParams(1.0, 1.0), rng)
    assert out.occ.tolist() == [1]
    assert dt > 0


def test_kmc_step_waiting_time_mean():
    """From (0) with alpha = beta = 1 the waiting time is Exp(2)."""
    rng = RandomStream(12)
    reps = 20000
    total = 0.0
    for _ in range(reps):
        _, dt = kmc_step(cfg(0), BoundaryParams(1.0, 1.0), rng)
        total += dt
    se = 0.5 / np.sqrt(reps)
    assert abs(total / reps - 0.5) < 4 * se


def test_kmc_step_swap_probability():
    """From (1, 0) with alpha = beta = 0.5 the swap has probability 1/2."""
    rng = RandomStream(13)
    reps = 100000
    swaps = 0
    start = cfg(1, 0)
    for _ in range(reps):
        out, _ = kmc_step(start, BoundaryParams(0.5, 0.5), rng)
        if out.occ.tolist() == [0, 1]:
            swaps += 1
    se = np.sqrt(0.25 / reps)
    assert abs(swaps / reps - 0.5) < 4 * se


def test_event_frequency_chi_square():
    """Empirical event frequencies match the exact rate vector."""
    occ0 = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    a, b = 0.3, 0.7
    counts = _kernels.count_event_frequencies(occ0, a, b, 100000, 424242)
    # bond rates then left, right; bond (3,4) joins equal values
    rates = np.array([1.0, 1.0, 0.0, 1.0, 1 - a, b])
    assert counts[2] == 0
    probs = rates / rates.sum()
    n = counts.sum()
    live = probs > 0
    chi2 = np.sum((counts[live] - n * probs[live]) ** 2 / (n * probs[live]))
    # 4-sigma-ish bound for 4 degrees of freedom
    assert chi2 < 25.0


def test_particle_count_changes_by_at_most_one():
    rng = RandomStream(5)
    state = sample_product(np.full(7, 0.5), rng, n=8)
    bp = BoundaryParams(0.4, 0.9)
    for _ in range(500):
        new, _ = kmc_step(state, bp, rng)
        delta = int(new.particle_count()) - int(state.particle_count())
        assert delta in (-1, 0, 1)
        state = new


def test_evolve_tau_zero_is_identity():
    rng = RandomStream(3)
    state = cfg(1, 0, 0, 1)
    out = evolve(state, BoundaryParams(0.2, 0.8), 0.0, rng)
    assert out.occ.tolist() == state.occ.tolist()


def test_evolve_deterministic_given_seed():
    bp = BoundaryParams(0.15, 0.85)
    runs = []
    for _ in range(2):
        rng = RandomStream(777)
        state = sample_product(np.full(11, 0.5), rng, n=12)
        out = evolve(state, bp, 1.5, rng)
        runs.append(out.occ.tolist())
    assert runs[0] == runs[1]


def test_evolve_absorbing_status():
    rng = RandomStream(21)
    out, status = evolve(cfg(1, 0, 1), BoundaryParams(0.0, 0.0), 50.0, rng,
                         return_status=True)
    assert status == 1
    assert out.occ.tolist() == [0, 0, 0]
    with pytest.raises(AbsorbingStateError):
        kmc_step(out, BoundaryParams(0.0, 0.0), rng)


def test_evolve_equilibrium_site_means():
    """alpha = beta = g keeps the product Bernoulli(g) marginals."""
    g = 0.3
    n = 16
    reps = 10000
    obs = np.array([1.0 * n * n])
    occ = np.empty((reps, 1, n - 1), dtype=np.uint8)
    status = np.empty(reps, dtype=np.uint8)
    _kernels.ensemble_snapshots(g, g, np.full(n - 1, g), obs, 2024, occ, status)
    means = occ[:, 0, :].mean(axis=0)
    se = np.sqrt(g * (1 - g) / reps)
    assert np.max(np.abs(means - g)) < 4 * se


def test_evolve_matches_heat_equation():
    """Empty start, full drive: replica means follow the lattice heat flow."""
    n = 20
    reps = 10000
    tau = 2.0
    obs = np.array([tau * n * n])
    occ = np.empty((reps, 1, n - 1), dtype=np.uint8)
    status = np.empty(reps, dtype=np.uint8)
    _kernels.ensemble_snapshots(0.0, 1.0, np.zeros(n - 1), obs, 90210, occ, status)
    means = occ[:, 0, :].mean(axis=0)
    p0 = Profile1D(n, np.concatenate(([0.0], np.zeros(n - 1), [1.0])))
    ref = solve_heat_1d(p0, tau).values[1:-1]
    se = np.sqrt(np.maximum(ref * (1 - ref), 1e-4) / reps)
    assert np.max(np.abs(means - ref) / se) < 4


def test_sample_product_degenerate():
    rng = RandomStream(8)
    assert sample_product(np.ones(9), rng, n=10).occ.tolist() == [1] * 9
    assert sample_product(np.zeros(9), rng, n=10).occ.tolist() == [0] * 9


def test_sample_product_marginals_and_independence():
    rng = RandomStream(9)
    n = 100
    draws = 10000
    occ = np.empty((draws, n - 1))
    for r in range(draws):
        occ[r] = sample_product(np.full(n - 1, 0.5), rng, n=n).occ
    se = 0.5 / np.sqrt(draws)
    assert np.max(np.abs(occ.mean(axis=0) - 0.5)) < 4 * se
    # pairwise covariances vanish (spot-check a band of pairs)
    d = occ - occ.mean(axis=0)
    for x in range(0, n - 2, 7):
        c = np.dot(d[:, x], d[:, x + 1]) / (draws - 1)
        assert abs(c) < 4 * 0.25 / np.sqrt(draws)


def test_sample_product_accepts_profile():
    rng = RandomStream(10)
    prof = Profile1D.linear(12, 0.0, 1.0)
    out = sample_product(prof, rng)
    assert out.n == 12
    assert set(out.occ.tolist()) <= {0, 1}


def test_gamma_field_constant_h_vanishes():
    state = cfg(1, 0, 1)
    assert gamma_field(state, BoundaryParams(0.2, 0.9), lambda u: 3.0) == 0.0


def test_gamma_field_linear_h_n3():
    # unit discrete gradient; each of the three events contributes 1/3
    val = gamma_field(cfg(1, 0), BoundaryParams(0.0, 1.0), lambda u: u)
    assert val == pytest.approx(1.0)


def field_value(state, h_vals):
    n = state.n
    return np.dot(h_vals[1:n], state.occ) / np.sqrt(n)


def test_gamma_field_matches_generator_identity():
    """Gamma equals N^2 (L Y^2 - 2 Y L Y) by exhaustive event application.

    Test functions vanish at the endpoints, as in the Dirichlet class the
    field is paired with; the boundary gradients then encode exactly the
    field jump of a reservoir flip.
    """
    rng = np.random.default_rng(6021)
    for _ in range(25):
        n = int(rng.integers(3, 9))
        bits = rng.integers(0, 2, n - 1).astype(np.uint8)
        state = LatticeConfig(n, bits)
        bp = BoundaryParams(rng.uniform(), rng.uniform())
        h_vals = rng.normal(size=n + 1)
        h_vals[0] = h_vals[n] = 0.0
        y0 = field_value(state, h_vals)
        acc = 0.0
        for (label, site), rate in event_rates(state, bp):
            nxt = state.copy()
            if label == "swap":
                nxt.occ[site - 1], nxt.occ[site] = nxt.occ[site], nxt.occ[site - 1]
            else:
                nxt.occ[site - 1] ^= 1
            dy = field_value(nxt, h_vals) - y0
            acc += rate * dy * dy
        direct = gamma_field(state, bp, h_vals)
        assert direct == pytest.approx(n * n * acc, rel=1e-12, abs=1e-12)


def test_clock_conversion():
    c = SimClock.from_micro(50.0, 10)
    assert c.diffusive_time == pytest.approx(0.5)
    assert SimClock.from_diffusive(0.5, 10).micro_time == pytest.approx(50.0)


def test_stream_replicas_are_distinct_and_reproducible():
    a = RandomStream(123, 0).uniform(size=8)
    b = RandomStream(123, 1).uniform(size=8)
    c = RandomStream(123, 0).uniform(size=8)
    assert np.array_equal(a, c)
    assert not np.array_equal(a, b)
    assert np.all((a >= 0) & (a < 1))
