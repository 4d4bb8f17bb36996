"""Boundary-driven symmetric simple exclusion toolkit.

Exact kinetic Monte Carlo for the open chain with reservoir densities
(alpha, beta), dense-generator oracles for small systems, lattice heat
and correlation solvers, spectral covariance formulas for the limiting
field, and an OU Galerkin simulator, plus the statistics used to compare
them against each other.
"""

from .exact import (CapacityError, StationaryDistribution, build_generator_dense,
                    exact_profile, exact_two_point, fit_two_point_shape,
                    reversibility_defect, stationary_distribution)
from .ou import (lyapunov_stationary, noise_covariance, noise_covariance_profile,
                 simulate_ou)
from .pde import (Profile1D, SolverError, TriangleField, correlation_evolution,
                  discrete_gradient, gradient_maxprinciple_check, green_closed_form,
                  heat_profiles, laplacian_1d, laplacian_triangle, solve_green_triangle,
                  solve_heat_1d, solve_parabolic_triangle, triangle_laplacian_matrix)
from .process import (AbsorbingStateError, BoundaryParams, LatticeConfig, SimClock,
                      event_rates, evolve, gamma_field, kmc_step, sample_product)
from .spectral import (ContinuumProfile, basis, chi, dynamic_covariance, eigenvalue,
                       green_kernel, semigroup_apply, sobolev_norm,
                       stationary_covariance, stationary_covariance_matrix,
                       stationary_covariance_quadrature)
from .stats import (EnsembleSpec, estimate_covariance, gaussianity_check,
                    martingale_diagnostic, project_field, record_martingale,
                    run_ensemble)

__version__ = "0.1.0"

__all__ = [
    "AbsorbingStateError", "BoundaryParams", "CapacityError", "ContinuumProfile",
    "EnsembleSpec", "LatticeConfig", "Profile1D", "SimClock", "SolverError",
    "StationaryDistribution", "TriangleField", "basis", "build_generator_dense",
    "chi", "correlation_evolution", "discrete_gradient", "dynamic_covariance",
    "eigenvalue", "estimate_covariance", "event_rates", "evolve", "exact_profile",
    "exact_two_point", "fit_two_point_shape", "gamma_field", "gaussianity_check",
    "gradient_maxprinciple_check", "green_closed_form", "green_kernel",
    "heat_profiles", "kmc_step", "laplacian_1d", "laplacian_triangle",
    "lyapunov_stationary", "martingale_diagnostic", "noise_covariance",
    "noise_covariance_profile", "project_field", "record_martingale",
    "reversibility_defect", "run_ensemble", "sample_product", "semigroup_apply",
    "simulate_ou", "sobolev_norm", "solve_green_triangle", "solve_heat_1d",
    "solve_parabolic_triangle", "stationary_covariance",
    "stationary_covariance_matrix", "stationary_covariance_quadrature",
    "stationary_distribution", "triangle_laplacian_matrix", "__version__",
]
