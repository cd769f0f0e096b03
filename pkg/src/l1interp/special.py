"""Standard-normal primitives, soft thresholding and closed-form Gaussian integrals.

Scalar and array inputs are both accepted by the elementwise functions; scalars
come back as Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special as _sp

SQRT_2PI = math.sqrt(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / SQRT_2PI
_SQRT1_2 = math.sqrt(0.5)

DEFAULT_HERMITE_ORDER = 61


def _out(x, value):
    if np.ndim(x) == 0:
        return float(value)
    return value


def phi(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return _out(x, INV_SQRT_2PI * np.exp(-0.5 * x * x))


def Phi(x):
    """Standard normal CDF, computed as ``erfc(-x/sqrt(2))/2``.

    The complementary error function keeps full relative precision in the
    lower tail down to the underflow threshold (x ~ -38).
    """
    x = np.asarray(x, dtype=float)
    return _out(x, 0.5 * _sp.erfc(-x * _SQRT1_2))


def log_Phi(x):
    """``log Phi(x)``, finite for arbitrarily negative ``x``."""
    x = np.asarray(x, dtype=float)
    return _out(x, _sp.log_ndtr(x))


# Rational approximation of the inverse normal CDF (P. J. Acklam), relative
# error about 1.15e-9; two Newton steps on Phi bring it to machine precision.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam_lower(p: float) -> float:
    # valid for 0 < p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def _phi_inv_lower(p: float) -> float:
    x = _acklam_lower(p)
    for _ in range(2):
        # relative Newton step keeps precision when p is tiny
        cdf = 0.5 * math.erfc(-x * _SQRT1_2)
        x -= (cdf - p) / (INV_SQRT_2PI * math.exp(-0.5 * x * x))
    return x


def Phi_inv(p):
    """Inverse standard normal CDF.

    Raises
    ------
    ValueError
        If any ``p`` lies outside the open interval (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValueError("Phi_inv requires 0 < p < 1")

    def one(v: float) -> float:
        if v <= 0.5:
            return _phi_inv_lower(v)
        # 1 - v is exact for v >= 0.5
        return -_phi_inv_lower(1.0 - v)

    if arr.ndim == 0:
        return one(float(arr))
    return np.vectorize(one, otypes=[float])(arr)


def soft_threshold(x, zeta):
    """Soft thresholding ``(|x| - zeta)_+ sign(x)``."""
    if np.any(np.asarray(zeta) < 0):
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return _out(x, np.sign(x) * np.maximum(np.abs(x) - zeta, 0.0))


def soft_threshold_deriv(x, zeta):
    """Derivative of :func:`soft_threshold` in ``x``; 0 at the kinks ``|x| = zeta``."""
    if np.any(np.asarray(zeta) < 0):
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return _out(x, (np.abs(x) > zeta).astype(float))


def truncated_second_moment(a, b):
    """``int_b^inf (z - a)^2 phi(z) dz`` in closed form.

    Equals ``(b - 2a) phi(b) + (a^2 + 1) (1 - Phi(b))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    val = (b - 2.0 * a) * phi(b) + (a * a + 1.0) * Phi(-b)
    return _out(a + b, val)


def g_fn(x):
    """``phi(x) - x Phi(-x)``, the Gaussian expected excess ``E[(Z - x)_+]``."""
    x = np.asarray(x, dtype=float)
    return _out(x, phi(x) - x * Phi(-x))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights approximating an expectation or an integral."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have equal length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.nodes)


def hermite_rule(order: int = DEFAULT_HERMITE_ORDER) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule normalized to integrate against N(0, 1)."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    return QuadratureRule(nodes, weights / SQRT_2PI, "gauss-hermite-probabilist")


def interval_rule(lo: float, hi: float, order: int = 64) -> QuadratureRule:
    """Gauss-Legendre rule on ``[lo, hi]`` (plain integral, no density)."""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    return QuadratureRule(lo + half * (x + 1.0), half * w, "adaptive-interval")


def gaussian_expectation(f: Callable, rule: QuadratureRule | None = None) -> float:
    """Approximate ``E[f(Z)]`` for ``Z ~ N(0, 1)`` with a Hermite rule."""
    if rule is None:
        rule = hermite_rule()
    vals = np.asarray(f(rule.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = rule.nodes[~np.isfinite(vals)]
        raise FloatingPointError(f"non-finite integrand at nodes {bad[:5]}")
    return float(np.dot(rule.weights, vals))


def bivariate_expectation(f: Callable, cov: np.ndarray, order: int = 41) -> float:
    """``E[f(Z1, Z2)]`` for a centered Gaussian pair with 2x2 covariance ``cov``.

    Uses a tensor Hermite rule on the Cholesky factor. A correlation outside
    [-1, 1] coming from accumulated rounding is clipped just inside.
    """
    s11, s22, s12 = float(cov[0][0]), float(cov[1][1]), float(cov[0][1])
    sd1, sd2 = math.sqrt(max(s11, 0.0)), math.sqrt(max(s22, 0.0))
    rho = 0.0 if sd1 == 0.0 or sd2 == 0.0 else s12 / (sd1 * sd2)
    lim = 1.0 - 1e-12
    if abs(rho) > lim:
        if abs(rho) > 1.0 + 1e-8:
            import warnings

            warnings.warn(f"correlation {rho:.3g} clipped to the unit interval", RuntimeWarning)
        rho = math.copysign(lim, rho)
    rule = hermite_rule(order)
    u, v = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    w = np.outer(rule.weights, rule.weights)
    z1 = sd1 * u
    z2 = sd2 * (rho * u + math.sqrt(1.0 - rho * rho) * v)
    return float(np.sum(w * f(z1, z2)))


def moment_limit_ratios(alpha: float) -> tuple[float, float, float]:
    """Tail ratios whose ``alpha -> inf`` limits are ``1``, ``1`` and ``-2``.

    ``alpha Phi(-alpha)/phi``, ``alpha^2 g(alpha)/phi`` and
    ``alpha^3 [alpha phi - (alpha^2 + 1) Phi(-alpha)]/phi``.
    """
    f, tail = phi(alpha), Phi(-alpha)
    return (alpha * tail / f,
            alpha**2 * (f - alpha * tail) / f,
            alpha**3 * (alpha * f - (alpha * alpha + 1.0) * tail) / f)
