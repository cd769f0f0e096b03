"""Asymptotic risk of minimum l1-norm interpolators and the Lasso.

Submodules
----------
special      Gaussian primitives, soft thresholding, quadrature rules
prior        signal priors and model parameters
fixed_point  interpolator and Lasso fixed-point solvers
risk_curve   sweeps over the aspect ratio, derivative, limit curves
amp          generalized AMP, lambda schedules, state evolution
montecarlo   finite-sample instances, basis pursuit, Lasso, figure sweeps
cli          command-line entry point
"""

from .fixed_point import (FixedPointSolution, SolverError, alpha_min, lambda_of_alpha,
                          solve_interpolator, solve_lasso, state_evolution_map)
from .kernels import BACKEND
from .prior import ModelParams, Prior, magnitude_from_snr, sparse_prior
from .risk_curve import (H_fn, RiskCurve, eps_to_zero_limits, l2_interpolator_risk, nu_prime,
                         ols_limit, sweep, tau0_sq)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FixedPointSolution", "H_fn", "ModelParams", "Prior", "RiskCurve", "SolverError",
    "alpha_min", "eps_to_zero_limits", "l2_interpolator_risk", "lambda_of_alpha",
    "magnitude_from_snr", "nu_prime", "ols_limit", "solve_interpolator", "solve_lasso",
    "sparse_prior", "state_evolution_map", "sweep", "tau0_sq",
]
