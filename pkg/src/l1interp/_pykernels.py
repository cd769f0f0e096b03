"""Pure-Python implementations of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function. Used when the compiled
extension is unavailable or ``L1INTERP_PURE_PYTHON`` is set.

Atom arrays: ``values`` holds signal magnitudes, ``probs`` their weights.
``u`` is the reciprocal noise level ``1/tau``; every Gaussian integral is
evaluated at standardized atoms ``values * u``.
"""

import math

import numpy as np

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT1_2 = math.sqrt(0.5)

# bracket doublings before giving up
MAX_EXPAND = 200


class KernelError(RuntimeError):
    pass


def _pdf(x):
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _cdf(x):
    return 0.5 * math.erfc(-x * _SQRT1_2)


def tail_sum(values, probs, u, alpha):
    """``sum_i p_i P(|v_i u + Z| > alpha)``."""
    s = 0.0
    for v, p in zip(values, probs):
        b = v * u
        s += p * (_cdf(b - alpha) + _cdf(-b - alpha))
    return s


def atom_mse(b, alpha):
    """``E[(eta(b + Z; alpha) - b)^2]`` through two truncated second moments."""
    # int_{alpha-b}^inf (z-alpha)^2 phi + int_{alpha+b}^inf (z-alpha)^2 phi + b^2 P(|b+Z| <= alpha)
    lo1 = alpha - b
    lo2 = alpha + b
    m1 = (lo1 - 2.0 * alpha) * _pdf(lo1) + (alpha * alpha + 1.0) * _cdf(-lo1)
    m2 = (lo2 - 2.0 * alpha) * _pdf(lo2) + (alpha * alpha + 1.0) * _cdf(-lo2)
    inside = _cdf(alpha - b) - _cdf(-alpha - b)
    return m1 + m2 + b * b * inside


def mse_sum(values, probs, u, alpha):
    s = 0.0
    for v, p in zip(values, probs):
        s += p * atom_mse(v * u, alpha)
    return s


def solve_alpha(values, probs, u, delta, tol=0.0):
    """Root in alpha of ``tail_sum(alpha) = delta`` by bracketed bisection.

    ``tol=0`` bisects until the bracket cannot shrink further.
    Returns ``(alpha, iterations)``.
    """
    lo, hi = 0.0, 1.0
    n_expand = 0
    while tail_sum(values, probs, u, hi) - delta > 0.0:
        lo = hi
        hi *= 2.0
        n_expand += 1
        if n_expand > MAX_EXPAND:
            raise KernelError("alpha bracket expansion failed")
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        if tail_sum(values, probs, u, mid) - delta > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    # pick the endpoint with the smaller residual
    rlo = abs(tail_sum(values, probs, u, lo) - delta)
    rhi = abs(tail_sum(values, probs, u, hi) - delta)
    return (lo if rlo <= rhi else hi), it + n_expand


def interp_residual(values, probs, u, delta, sigma):
    """Second interpolator equation divided by tau^2, with alpha eliminated.

    Returns ``(residual, alpha)``.
    """
    alpha, _ = solve_alpha(values, probs, u, delta)
    r = sigma * sigma * u * u - 1.0 + mse_sum(values, probs, u, alpha) / delta
    return r, alpha


def solve_interp(values, probs, delta, sigma, u_lo, u_hi, tol):
    """Outer bisection on ``u = 1/tau`` over ``[u_lo, u_hi]``.

    The residual is negative as ``u -> 0`` and nonnegative at ``u = 1/sigma``.
    Returns ``(u, alpha, iterations)``.
    """
    r_lo, _ = interp_residual(values, probs, u_lo, delta, sigma)
    r_hi, _ = interp_residual(values, probs, u_hi, delta, sigma)
    if r_lo > 0.0 or r_hi < 0.0:
        raise KernelError(
            f"no sign change on [{u_lo!r}, {u_hi!r}]: residuals {r_lo!r}, {r_hi!r}"
        )
    lo, hi = u_lo, u_hi
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        r, _ = interp_residual(values, probs, mid, delta, sigma)
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    r_lo, a_lo = interp_residual(values, probs, lo, delta, sigma)
    r_hi, a_hi = interp_residual(values, probs, hi, delta, sigma)
    if abs(r_lo) <= abs(r_hi):
        return lo, a_lo, it
    return hi, a_hi, it


def se_map(values, probs, tau_sq, zeta, delta, sigma):
    """State-evolution map ``sigma^2 + E[(eta(Theta + tau Z; zeta) - Theta)^2] / delta``."""
    if tau_sq <= 0.0:
        s = 0.0
        for v, p in zip(values, probs):
            m = min(abs(v), zeta)
            s += p * m * m
        return sigma * sigma + s / delta
    tau = math.sqrt(tau_sq)
    return sigma * sigma + tau_sq * mse_sum(values, probs, 1.0 / tau, zeta / tau) / delta


def solve_tau_of_alpha(values, probs, alpha, delta, sigma, tol=0.0):
    """Fixed point ``tau^2 = F(tau^2, alpha tau)`` by bisection on tau^2.

    Requires ``alpha > alpha_min(delta)`` so that the map crosses the identity
    exactly once on ``[sigma^2, inf)``. Returns ``(tau_sq, iterations)``.
    """
    lo = sigma * sigma
    hi = 2.0 * lo if lo > 0.0 else 1.0
    n_expand = 0
    while se_map(values, probs, hi, alpha * math.sqrt(hi), delta, sigma) - hi > 0.0:
        lo = hi
        hi *= 2.0
        n_expand += 1
        if n_expand > MAX_EXPAND:
            raise KernelError("tau bracket expansion failed")
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol * mid:
            break
        if se_map(values, probs, mid, alpha * math.sqrt(mid), delta, sigma) - mid > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return 0.5 * (lo + hi), it + n_expand


def lasso_cd(X, y, lam, theta, tol, max_sweeps):
    """Cyclic coordinate descent for ``0.5 ||y - X theta||^2 + lam ||theta||_1``.

    ``theta`` is updated in place. Returns ``(sweeps, kkt_violation)``.
    """
    n, p = X.shape
    col_sq = np.einsum("ij,ij->j", X, X)
    r = y - X @ theta
    Xt = np.ascontiguousarray(X.T)
    kkt = math.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for j in range(p):
            cj = col_sq[j]
            if cj == 0.0:
                continue
            xj = Xt[j]
            old = theta[j]
            rho = float(xj @ r) + cj * old
            if rho > lam:
                new = (rho - lam) / cj
            elif rho < -lam:
                new = (rho + lam) / cj
            else:
                new = 0.0
            if new != old:
                r -= (new - old) * xj
                theta[j] = new
        kkt = kkt_violation(X, r, theta, lam)
        if kkt <= tol:
            break
    return sweeps, kkt


def kkt_violation(X, r, theta, lam):
    """Largest violation of the Lasso subgradient conditions given residual ``r``."""
    g = X.T @ r
    nz = theta != 0.0
    v_nz = np.abs(g[nz] - lam * np.sign(theta[nz]))
    v_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    m = 0.0
    if v_nz.size:
        m = max(m, float(v_nz.max()))
    if v_z.size:
        m = max(m, float(v_z.max()))
    return m
