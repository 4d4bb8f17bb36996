"""End-to-end verification battery for the whole package.

Each test is one numbered criterion with its parameters and tolerances
pinned; running ``pytest -v tests/test_acceptance.py`` therefore prints
one pass/fail line per criterion.  Statistical criteria use fixed seeds,
so every run sees the same ensembles and the verdicts are reproducible.
"""

import numpy as np
import pytest

from bdssep.exact import (build_generator_dense, exact_profile,
                          exact_two_point, fit_two_point_shape,
                          stationary_distribution)
from bdssep.ou import lyapunov_stationary, noise_covariance, simulate_ou
from bdssep.pde import (Profile1D, TriangleField, correlation_evolution,
                        gradient_maxprinciple_check, green_closed_form,
                        solve_green_triangle, solve_heat_1d,
                        solve_parabolic_triangle, superdiagonal_indicator)
from bdssep.process import BoundaryParams
from bdssep.spectral import (ContinuumProfile, basis, dynamic_covariance,
                             gauss_legendre, inverse_laplacian, semigroup_apply,
                             stationary_covariance, stationary_covariance_matrix,
                             stationary_covariance_quadrature)
from bdssep.stats import (EnsembleSpec, estimate_covariance, gaussianity_check,
                          martingale_diagnostic, record_martingale,
                          run_ensemble)

SEED = 20260823


def _report(num, passed, detail):
    print(f"{'PASS' if passed else 'FAIL'} criterion {num}: {detail}")
    assert passed, f"criterion {num}: {detail}"


def test_criterion_1_exact_stationary_correlations():
    """Dense-chain stationary state: linear profile and two-point shape.

    All sizes 2..12 against all boundary densities on the quarter grid;
    profile linear to 1e-12, correlations match the product shape
    sigma (beta-alpha)^2/(N-1) (x/N)(1-y/N) to 1e-10 with one global
    sign.
    """
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    prof_dev = 0.0
    shape_dev = 0.0
    sigmas = set()
    for n in range(2, 13):
        for a in grid:
            for b in grid:
                bp = BoundaryParams(a, b)
                sd = stationary_distribution(build_generator_dense(n, bp))
                prof = exact_profile(sd, bp)
                lin = Profile1D.linear(n, a, b)
                prof_dev = max(prof_dev, float(np.max(np.abs(prof.values - lin.values))))
                shape = fit_two_point_shape(exact_two_point(sd), bp)
                shape_dev = max(shape_dev, shape.max_abs_dev)
                if shape.sigma != 0:
                    sigmas.add(shape.sigma)
    ok = prof_dev <= 1e-12 and shape_dev <= 1e-10 and sigmas == {-1}
    _report(1, ok, f"profile dev {prof_dev:.2e} (tol 1e-12), "
                   f"shape dev {shape_dev:.2e} (tol 1e-10), sign {sigmas}")


def test_criterion_2_green_function():
    """Sparse triangle solve against the closed form at four sizes."""
    c = 1.0
    worst = 0.0
    peaks_ok = True
    for n in (8, 16, 32, 64):
        g = solve_green_triangle(n, c)
        worst = max(worst, float(np.max(np.abs(g.vec - green_closed_form(n, c).vec))))
        peaks_ok = peaks_ok and float(np.max(np.abs(g.vec))) <= c / (4.0 * (n - 1)) + 1e-12
    ok = worst <= 1e-8 and peaks_ok
    _report(2, ok, f"max dev {worst:.2e} (tol 1e-8), peak bound "
                   f"{'holds' if peaks_ok else 'violated'} at N in (8, 16, 32, 64)")


def test_criterion_3_equilibrium_fluctuations():
    """2e4 stationary samples at density one half, N = 100.

    The initial product draw at constant density 1/2 is itself invariant,
    so the short burn-in only exercises the dynamics before sampling; the
    mode covariance must be 0.25 I within four standard errors.
    """
    spec = EnsembleSpec(100, BoundaryParams(0.5, 0.5), 20000, (0.0,),
                       seed=SEED, modes=4, burn_in=0.2)
    est = estimate_covariance(run_ensemble(spec).samples_at(0))
    target = 0.25 * np.eye(4)
    z = np.abs(est.matrix - target) / est.se
    ok = bool(np.all(z <= 4.0))
    _report(3, ok, f"worst |z| {z.max():.2f} over 10 entries (threshold 4)")


def test_criterion_4_stationary_covariance_long_range():
    """Driven steady state at N = 128 against the continuum covariance.

    The limit formula differs from the lattice value by O(1/N), hence
    the additive allowance 0.02 alongside the four-standard-error band;
    each mode must also look Gaussian (skewness and kurtosis z < 4).

    Known red verdict: the Gaussianity clause fails by a small margin
    that is a property of the model, not of the code.  Driven profiles
    give the even modes a residual skewness of order 1/sqrt(N); exact
    enumeration at N <= 14 extrapolates to g1 = 0.0773 for mode 2 at
    N = 128, which 2e4 samples resolve at about 4.5 standard errors.
    The covariance clause passes with a five-fold margin.  The threshold
    and sample count stay as stated rather than being tuned around the
    effect.
    """
    bp = BoundaryParams(0.1, 0.9)
    spec = EnsembleSpec(128, bp, 20000, (0.0,), seed=SEED + 1, modes=4,
                       burn_in=1.0)
    samples = run_ensemble(spec).samples_at(0)
    est = estimate_covariance(samples)
    target = stationary_covariance_matrix(4, bp.alpha, bp.beta)
    dev = np.abs(est.matrix - target)
    ok_cov = bool(np.all(dev <= np.maximum(4.0 * est.se, 0.02)))
    gauss = gaussianity_check(samples)
    ok_gauss = not gauss.flagged.any()
    ok = ok_cov and ok_gauss
    _report(4, ok, f"worst dev {dev.max():.4f} (allow max(4 SE, 0.02)), "
                   f"worst gaussianity |z| "
                   f"{max(np.abs(gauss.z_skewness).max(), np.abs(gauss.z_kurtosis).max()):.2f}")


def test_criterion_5_relaxation_covariance():
    """Out-of-stationarity ensemble against the two-time covariance formula.

    Product start at gamma(u) = 0.1 + 0.8 u^2, N = 128; at each of three
    times the mode covariance must match the analytic evolution within
    max(4 SE, 0.02) and the site means must follow the discrete heat
    flow within 4 SE.
    """
    bp = BoundaryParams(0.1, 0.9)
    gamma = lambda u: 0.1 + 0.8 * u**2
    times = (0.05, 0.1, 0.2)
    spec = EnsembleSpec(128, bp, 20000, times, seed=SEED + 2, modes=3,
                       init="product", initial=gamma)
    result = run_ensemble(spec)
    profile = ContinuumProfile.from_function(gamma)
    p0 = Profile1D.from_function(128, gamma)
    worst_dev = 0.0
    cov_ok = True
    mean_z = 0.0
    for ti, t in enumerate(times):
        est = estimate_covariance(result.samples_at(ti))
        analytic = np.array([[dynamic_covariance(t, t, j, k, profile)
                              for k in range(1, 4)] for j in range(1, 4)])
        dev = np.abs(est.matrix - analytic)
        worst_dev = max(worst_dev, float(dev.max()))
        cov_ok = cov_ok and bool(np.all(dev <= np.maximum(4.0 * est.se, 0.02)))
        occ = result.occupations[:, ti, :].astype(np.float64)
        ref = solve_heat_1d(p0, t).interior()
        se = occ.std(axis=0, ddof=1) / np.sqrt(occ.shape[0])
        mean_z = max(mean_z, float(np.max(np.abs(occ.mean(axis=0) - ref) / se)))
    ok = cov_ok and mean_z <= 4.0
    _report(5, ok, f"worst covariance dev {worst_dev:.4f} (allow max(4 SE, 0.02)), "
                   f"worst profile |z| {mean_z:.2f} (threshold 4)")


def test_criterion_6_ou_consistency():
    """Mode-space OU system: Lyapunov law, sampling, and step bias.

    The Lyapunov solution must reproduce the static covariance at
    J = 16; a small-step Euler run must land on it within 4 SE; and the
    known O(dt) variance bias of the Euler step must halve when the step
    halves (measured on the slowest mode with 5e5 paths).
    """
    a, b = 0.1, 0.9
    noise = noise_covariance(16, a, b)
    sig = lyapunov_stationary(noise)
    lyap_dev = float(np.max(np.abs(sig - stationary_covariance_matrix(16, a, b))))
    ok_lyap = lyap_dev <= 1e-6

    lam16 = (16 * np.pi) ** 2
    dt_req = 0.01 / lam16
    n_steps = int(np.ceil(0.5 / dt_req - 1e-9))
    res = simulate_ou(16, noise, 0.5, 0.5 / n_steps, 2000, seed=SEED + 3,
                      record_stride=n_steps)
    est = estimate_covariance(res.terminal_samples())
    z = np.abs(est.matrix - sig) / est.se
    ok_em = bool(np.all(z <= 4.0))

    b1 = noise_covariance(1, a, b)
    sig1 = float(lyapunov_stationary(b1)[0, 0])
    biases = []
    ses = []
    for steps, seed in ((200, SEED + 4), (400, SEED + 5)):
        r = simulate_ou(1, b1, 2.0, 2.0 / steps, 500000, seed=seed,
                        record_stride=steps)
        v = float(r.terminal_samples()[:, 0].var(ddof=1))
        biases.append(v - sig1)
        ses.append(v * np.sqrt(2.0 / (500000 - 1)))
    resolved = biases[0] > 8.0 * ses[0]
    halves = abs(biases[0] - 2.0 * biases[1]) <= 4.0 * np.hypot(ses[0], 2.0 * ses[1])
    ok = ok_lyap and ok_em and resolved and halves
    _report(6, ok, f"Lyapunov dev {lyap_dev:.2e} (tol 1e-6), worst EM |z| "
                   f"{z.max():.2f}, bias {biases[0]:.4f} -> {biases[1]:.4f} "
                   f"(halving {'holds' if halves else 'violated'})")


def test_criterion_7_maximum_principles():
    """Randomized property suites for the comparison bounds.

    One hundred inputs each: gradient bound for the heat flow, interior
    maximum principle and source bound on the triangle, Green peak
    bound; then the a-priori correlation bound (2 C0 + C0^2)/(2 N) for
    the driven evolution at N in (16, 32, 64).
    """
    rng = np.random.default_rng(SEED + 6)

    heat_ok = True
    for _ in range(100):
        vals = rng.uniform(0.0, 1.0, 51)
        rep = gradient_maxprinciple_check(Profile1D(50, vals), (0.01, 0.1, 1.0))
        heat_ok = heat_ok and rep.passed

    interior_ok = True
    source_ok = True
    for _ in range(100):
        n = int(rng.integers(5, 21))
        h = TriangleField(n, rng.normal(size=(n - 1) * (n - 2) // 2))
        _, rep = solve_parabolic_triangle(h, None, 0.2, steps=64,
                                          return_report=True)
        interior_ok = interior_ok and rep.sup_over_time <= h.sup_norm() + 1e-9
        g = rng.uniform(0.0, 3.0) * superdiagonal_indicator(n)
        _, rep = solve_parabolic_triangle(h, -g, 0.5, steps=64,
                                          return_report=True)
        cap = h.sup_norm() + float(np.max(g)) / (4.0 * (n - 1))
        source_ok = source_ok and rep.sup_over_time <= cap + 1e-9

    green_ok = True
    for _ in range(100):
        n = int(rng.integers(5, 41))
        c = float(rng.uniform(0.1, 5.0))
        g = solve_green_triangle(n, c)
        green_ok = green_ok and float(np.max(np.abs(g.vec))) <= c / (4.0 * (n - 1)) + 1e-10
        green_ok = green_ok and float(np.max(np.abs(g.vec - green_closed_form(n, c).vec))) <= 1e-8

    corr_ok = True
    worst_margin = 0.0
    for n in (16, 32, 64):
        p0 = Profile1D.from_function(n, lambda u: 0.1 + 0.8 * u**2)
        _, rep = correlation_evolution(TriangleField(n), p0, 0.5, steps=500)
        corr_ok = corr_ok and rep.passed
        worst_margin = max(worst_margin, rep.sup_over_time / rep.bound)
    ok = heat_ok and interior_ok and source_ok and green_ok and corr_ok
    _report(7, ok, "100-input suites (heat gradient, interior max, source "
                   f"bound, Green peak) all hold; correlation bound margin "
                   f"{worst_margin:.2f} <= 1 at N in (16, 32, 64)")


def test_criterion_8_martingale_structure():
    """Pathwise decomposition at N = 128: drift-compensated increments.

    Over one thousand stationary trajectories of length 0.5 the
    compensated increment must be centered (|z| < 4) and the realized
    quadratic variation must match the accumulated expected rate within
    ten percent.
    """
    record = record_martingale(128, BoundaryParams(0.1, 0.9), 0.5, 1000,
                               seed=SEED + 7, modes=2, burn_in=1.0)
    ok = True
    details = []
    for j in (1, 2):
        rep = martingale_diagnostic(record, j)
        ok = ok and abs(rep.z_increment) < 4.0 and abs(rep.qv_ratio - 1.0) <= 0.1
        details.append(f"mode {j}: z {rep.z_increment:+.2f}, "
                       f"QV ratio {rep.qv_ratio:.3f}")
    _report(8, ok, "; ".join(details))


def test_criterion_9_spectral_identities():
    """Closed-form layer self-checks at tight tolerances."""
    rng = np.random.default_rng(SEED + 8)
    v = rng.normal(size=10)
    semi_dev = float(np.max(np.abs(
        semigroup_apply(0.3, semigroup_apply(0.2, v)) - semigroup_apply(0.5, v))))

    u, w = gauss_legendre(64)
    ortho_dev = 0.0
    for j in range(1, 9):
        for k in range(j, 9):
            val = float(np.sum(w * basis(j, u) * basis(k, u)))
            ortho_dev = max(ortho_dev, abs(val - (1.0 if j == k else 0.0)))

    inv_ok = True
    for m in range(1, 6):
        e = np.zeros(6)
        e[m - 1] = 1.0
        out = inverse_laplacian(e)
        inv_ok = inv_ok and out[m - 1] == 1.0 / (m * np.pi) ** 2
        inv_ok = inv_ok and np.count_nonzero(out) == 1

    quad_dev = 0.0
    for a, b in ((0.0, 1.0), (0.1, 0.9), (0.7, 0.2)):
        for j in range(1, 6):
            for k in range(j, 6):
                quad_dev = max(quad_dev, abs(
                    stationary_covariance(j, k, a, b)
                    - stationary_covariance_quadrature(j, k, a, b)))
    ok = semi_dev <= 1e-14 and ortho_dev <= 1e-10 and inv_ok and quad_dev <= 1e-10
    _report(9, ok, f"semigroup dev {semi_dev:.2e} (tol 1e-14), orthonormality "
                   f"dev {ortho_dev:.2e} (tol 1e-10), inverse Laplacian exact: "
                   f"{inv_ok}, closed-vs-quadrature dev {quad_dev:.2e} (tol 1e-10)")
