"""Stable reaction-diffusion patterns on standard and rippled tori.

Construct a monotone pattern on the standard torus, forge the reaction
term that makes it stationary, certify linear stability, continue the
pattern onto tori with a rippled tube radius, verify the first-order
ripple response, and count the critical points of the result.
"""

from .geometry import (TorusParams, MetricPoint, SurfaceProfile,
                       torus_generatrix, metric_at, laplace_coefficients,
                       gradient_norm_sq, stas_indicator)
from .profiles import (ProfileConfig, Profile, PeriodicPattern, Nonlinearity,
                       ThresholdResult, build_profile, extend_symmetric,
                       forge_nonlinearity, threshold_waves)
from .operators import (PeriodicGrid, DiscreteOperator, assemble_laplacian,
                        assemble_laplacian_coefficient_form, quadrature,
                        weighted_inner_product, dirichlet_form)
from .steady import (SteadyState, ContinuationResult, residual, newton_solve,
                     continuation, symmetry_check)
from .spectral import (SpectralResult, SturmLiouvilleResult, principal_eigpair,
                       rayleigh_quotient, sl_reduction_eigpair,
                       half_torus_normalization_check, convergence_study)
from .dynamics import (EvolutionTrace, step_imex, default_dt, energy,
                       stability_probe)
from .perturbation import (PerturbationSolution, coefficients_AB,
                           solve_periodic_ode, solve_C1, solve_C2,
                           first_order_analysis, first_order_field,
                           discrete_first_order_profile, compare_with_newton,
                           perturbation_verdicts)
from .census import (CriticalPoint, CriticalPointReport, expected_set,
                     locate_critical_points, verify_count)
from .config import RunConfig, TOLERANCE_KEYS, load_config
from .pipeline import Pipeline
from . import errors

__version__ = "0.1.0"
