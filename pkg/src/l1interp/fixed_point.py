"""Fixed-point systems behind the asymptotic risk.

Two coordinate systems are used. For a general prior the unknowns are the
threshold multiplier ``alpha`` and the effective noise ``tau``. For the sparse
two-point prior with magnitude ``M`` the scaled coordinate
``nu = M / tau`` is available as well; ``F1`` and ``F2`` below are written in
it. Internally both reduce to bisection on ``u = 1 / tau``, which stays in the
bounded interval ``(0, 1/sigma]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .prior import ModelParams
from .special import Phi, Phi_inv, phi, truncated_second_moment

ROOT_TOL = 1e-12
RESIDUAL_TOL = 1e-11
U_FLOOR = 1e-14


class SolverError(RuntimeError):
    """A root could not be bracketed or the residual gate failed."""

    def __init__(self, message, bracket=None, residuals=None):
        super().__init__(message)
        self.bracket = bracket
        self.residuals = residuals


@dataclass(frozen=True)
class FixedPointSolution:
    alpha_star: float
    tau_star: float
    nu_star: float | None
    zeta_star: float
    residuals: tuple[float, float]
    iterations: int
    lam: float = 0.0

    @property
    def tau_sq(self) -> float:
        return self.tau_star**2


# ---------------------------------------------------------------------------
# nu coordinates for the sparse prior


def F1(nu, delta, alpha, epsilon):
    """Support equation: ``eps P(|nu sqrt(delta) + Z| > alpha) + (1-eps) P(|Z| > alpha) - delta``."""
    b = math.sqrt(delta) * nu
    return (epsilon * (Phi(-alpha + b) + Phi(-alpha - b))
            + 2.0 * (1.0 - epsilon) * Phi(-alpha) - delta)


def F22(nu, delta, alpha):
    """``E[(eta(sqrt(delta) nu + Z; alpha) - sqrt(delta) nu)^2]``."""
    b = math.sqrt(delta) * nu
    inside = Phi(alpha - b) - Phi(-alpha - b)
    return (truncated_second_moment(alpha, alpha - b)
            + truncated_second_moment(alpha, alpha + b) + b * b * inside)


def F23(alpha):
    """``E[eta(Z; alpha)^2] = 2 [ (alpha^2 + 1) Phi(-alpha) - alpha phi(alpha) ]``."""
    return 2.0 * truncated_second_moment(alpha, alpha)


def F21(nu, M, sigma=1.0):
    return (sigma * nu / M) ** 2 - 1.0


def F2(nu, delta, alpha, epsilon, M, sigma=1.0):
    """Risk equation divided by ``tau^2``; zero at the interpolator's fixed point."""
    return (F21(nu, M, sigma) + epsilon / delta * F22(nu, delta, alpha)
            + (1.0 - epsilon) / delta * F23(alpha))


def solve_alpha_nu(nu, delta, epsilon):
    """Unique ``alpha`` with ``F1(nu, delta, alpha) = 0``."""
    values = np.array([math.sqrt(delta) * nu, 0.0])
    probs = np.array([epsilon, 1.0 - epsilon])
    try:
        alpha, _ = kernels.solve_alpha(values, probs, 1.0, delta)
    except kernels.KernelError as exc:
        raise SolverError(str(exc)) from exc
    return alpha


def solve_alpha(tau, params: ModelParams):
    """Unique ``alpha`` with ``P(|Theta + tau Z| > alpha tau) = delta``."""
    if not 0 < params.delta < 1:
        raise ValueError("the support equation has a root only for 0 < delta < 1")
    pr = params.prior
    try:
        alpha, _ = kernels.solve_alpha(pr.values, pr.probs, 1.0 / tau, params.delta)
    except kernels.KernelError as exc:
        raise SolverError(str(exc)) from exc
    return alpha


# ---------------------------------------------------------------------------
# general-prior residuals


def support_residual(alpha, tau, params: ModelParams) -> float:
    pr = params.prior
    return kernels.tail_sum(pr.values, pr.probs, 1.0 / tau, alpha) - params.delta


def risk_residual(alpha, tau, params: ModelParams) -> float:
    """``(F(tau^2, alpha tau) - tau^2) / tau^2``; equals ``F2`` in nu coordinates."""
    pr = params.prior
    u = 1.0 / tau
    return ((params.sigma * u) ** 2 - 1.0
            + kernels.mse_sum(pr.values, pr.probs, u, alpha) / params.delta)


def state_evolution_map(tau_sq, zeta, params: ModelParams) -> float:
    """``sigma^2 + E[(eta(Theta + tau Z; zeta) - Theta)^2] / delta``."""
    if tau_sq < 0 or zeta < 0:
        raise ValueError("tau_sq and zeta must be nonnegative")
    pr = params.prior
    return kernels.se_map(pr.values, pr.probs, tau_sq, zeta, params.delta, params.sigma)


def _root_scale(params: ModelParams) -> float:
    # nu = scale * u for the sparse prior; keeps the absolute tolerance on nu
    return params.prior.max_abs / math.sqrt(params.delta)


def solve_interpolator(params: ModelParams, *, tol: float = ROOT_TOL,
                       residual_tol: float = RESIDUAL_TOL,
                       tau_bracket: tuple[float, float] | None = None) -> FixedPointSolution:
    """Solve the minimum-l1 interpolator system for ``0 < delta < 1``.

    Outer bisection on ``u = 1/tau`` (equivalently ``nu = M u``), inner
    bisection on ``alpha`` for the support equation.

    Parameters
    ----------
    tau_bracket : optional (tau_lo, tau_hi)
        Overrides the default ``[sigma, sigma / U_FLOOR]`` search range.
        Must enclose the root.
    """
    delta, sigma = params.delta, params.sigma
    if not 0 < delta < 1:
        raise ValueError("solve_interpolator needs 0 < delta < 1; use ols_limit for delta > 1")
    if params.prior.nonzero_mass <= 0:
        raise ValueError("the interpolator system requires P(Theta != 0) > 0")
    scale = _root_scale(params)
    if tau_bracket is None:
        u_lo, u_hi = U_FLOOR / scale, 1.0 / sigma
    else:
        u_lo, u_hi = 1.0 / tau_bracket[1], 1.0 / tau_bracket[0]
    pr = params.prior
    try:
        u, alpha, it = kernels.solve_interp(pr.values, pr.probs, delta, sigma, u_lo, u_hi,
                                            tol / scale)
    except kernels.KernelError as exc:
        raise SolverError(str(exc), bracket=(u_lo, u_hi)) from exc
    tau = 1.0 / u
    res = (abs(support_residual(alpha, tau, params)), abs(risk_residual(alpha, tau, params)))
    if max(res) > residual_tol:
        raise SolverError(f"residual gate failed: {res}", bracket=(u_lo, u_hi), residuals=res)
    nu = params.sparse[1] * u if params.sparse is not None else None
    return FixedPointSolution(alpha, tau, nu, alpha * tau, res, it)


def alpha_min(delta: float) -> float:
    """Nonnegative root of ``(1 + a^2) Phi(-a) - a phi(a) = delta / 2``."""
    if not 0 < delta <= 1:
        raise ValueError("alpha_min needs 0 < delta <= 1")

    def h(a):
        return (1.0 + a * a) * Phi(-a) - a * phi(a) - 0.5 * delta

    if h(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(h(lo)) <= abs(h(hi)) else hi


def tau_of_alpha(alpha: float, params: ModelParams) -> float:
    """Unique ``tau`` with ``tau^2 = F(tau^2, alpha tau)`` for ``alpha > alpha_min``."""
    floor = alpha_min(params.delta) if params.delta <= 1 else 0.0
    if not alpha > floor:
        raise ValueError("tau_of_alpha requires alpha > alpha_min(delta)")
    pr = params.prior
    try:
        tau_sq, _ = kernels.solve_tau_of_alpha(pr.values, pr.probs, alpha, params.delta,
                                               params.sigma)
    except kernels.KernelError as exc:
        raise SolverError(str(exc)) from exc
    return math.sqrt(tau_sq)


def _lambda_at(alpha, tau, params):
    pr = params.prior
    return alpha * tau * (1.0 - kernels.tail_sum(pr.values, pr.probs, 1.0 / tau, alpha)
                          / params.delta)


def lambda_of_alpha(alpha: float, params: ModelParams) -> float:
    """Regularization level whose Lasso fixed point has threshold multiplier ``alpha``."""
    return _lambda_at(alpha, tau_of_alpha(alpha, params), params)


def _alpha_at_zero_lambda(params: ModelParams) -> float:
    if params.prior.nonzero_mass > 0:
        return solve_interpolator(params).alpha_star
    # Theta = 0: the support equation does not involve tau
    return -Phi_inv(params.delta / 2.0)


def solve_lasso(lam: float, params: ModelParams, *, tol: float = ROOT_TOL,
                residual_tol: float = 1e-9) -> FixedPointSolution:
    """Lasso fixed point at regularization ``lam``; ``lam = 0`` gives the interpolator."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not 0 < params.delta < 1:
        raise ValueError("solve_lasso needs 0 < delta < 1")
    if lam == 0:
        return solve_interpolator(params)
    # lambda(alpha) is increasing and vanishes at the interpolator's alpha
    lo = _alpha_at_zero_lambda(params)
    step = max(1.0, lo)
    hi = lo + step
    n_expand = 0
    while lambda_of_alpha(hi, params) < lam:
        lo, step = hi, 2.0 * step
        hi = lo + step
        n_expand += 1
        if n_expand > 200:
            raise SolverError("lambda bracket expansion failed", bracket=(lo, hi))
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lambda_of_alpha(mid, params) < lam:
            lo = mid
        else:
            hi = mid
        it += 1
    alpha = 0.5 * (lo + hi)
    tau = tau_of_alpha(alpha, params)
    res = (abs(_lambda_at(alpha, tau, params) - lam),
           abs(state_evolution_map(tau * tau, alpha * tau, params) - tau * tau) / (tau * tau))
    if res[1] > residual_tol:
        raise SolverError(f"residual gate failed: {res}", residuals=res)
    nu = params.sparse[1] / tau if params.sparse is not None else None
    return FixedPointSolution(alpha, tau, nu, alpha * tau, res, it + n_expand, lam)
