"""Risk curve over the aspect ratio: sweeps, analytic derivative, limit curves."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fixed_point import (F22, F23, FixedPointSolution, SolverError, solve_interpolator)
from .prior import ModelParams
from .special import Phi, Phi_inv, phi

SINGULAR_TOL = 1e-14
CSV_HEADER = ("delta", "inv_delta", "tau_sq", "alpha", "nu", "nu_prime", "regime")


class SingularDerivativeError(ArithmeticError):
    pass


def _sparse(params: ModelParams) -> tuple[float, float, float]:
    if params.sparse is None:
        raise ValueError("analytic derivatives need a sparse two-point model")
    eps, M = params.sparse
    return eps, M, params.sigma


def partials_F1(nu, delta, alpha, epsilon):
    """``(d/dnu, d/ddelta, d/dalpha)`` of ``F1``."""
    sd = math.sqrt(delta)
    b = sd * nu
    pm, pp = phi(alpha - b), phi(alpha + b)
    d_alpha = -epsilon * (pm + pp) - 2.0 * (1.0 - epsilon) * phi(alpha)
    d_delta = epsilon * nu / (2.0 * sd) * (pm - pp) - 1.0
    d_nu = epsilon * sd * (pm - pp)
    return d_nu, d_delta, d_alpha


def partials_F2(nu, delta, alpha, epsilon, M, sigma=1.0):
    """``(d/dnu, d/ddelta, d/dalpha)`` of ``F2``."""
    b = math.sqrt(delta) * nu
    inside = Phi(alpha - b) - Phi(-alpha - b)
    tails = Phi(-alpha - b) + Phi(-alpha + b)
    da_22 = -2.0 * (phi(alpha + b) + phi(alpha - b)) + 2.0 * alpha * tails
    da_23 = -4.0 * (phi(alpha) - alpha * Phi(-alpha))
    d_alpha = epsilon / delta * da_22 + (1.0 - epsilon) / delta * da_23
    # F22 - delta * dF22/ddelta, simplified
    f22_shift = (-(alpha - b) * phi(alpha + b) - (alpha + b) * phi(alpha - b)
                 + (alpha * alpha + 1.0) * tails)
    d_delta = -epsilon / delta**2 * f22_shift - (1.0 - epsilon) / delta**2 * F23(alpha)
    d_nu = 2.0 * sigma**2 * nu / M**2 + epsilon / delta * 2.0 * nu * delta * inside
    return d_nu, d_delta, d_alpha


def nu_prime_parts(delta, solution: FixedPointSolution, params: ModelParams):
    """Numerator and denominator of the implicit-function formula for ``nu'(delta)``."""
    eps, M, sigma = _sparse(params)
    nu, a = solution.nu_star, solution.alpha_star
    n1, d1, a1 = partials_F1(nu, delta, a, eps)
    n2, d2, a2 = partials_F2(nu, delta, a, eps, M, sigma)
    return d2 * a1 - a2 * d1, n2 * a1 - a2 * n1


def nu_prime(delta, solution: FixedPointSolution, params: ModelParams) -> float:
    """Derivative of ``nu* = M / tau*`` with respect to ``delta``."""
    num, den = nu_prime_parts(delta, solution, params)
    if abs(den) < SINGULAR_TOL:
        raise SingularDerivativeError(f"denominator {den:.3e} at delta={delta}")
    return -num / den


def nu_star_fd(params: ModelParams, h: float | None = None) -> float:
    """Central finite difference of ``nu*(delta)`` from re-solved neighbours."""
    d = params.delta
    if h is None:
        h = 1e-4 * min(d, 1.0 - d)
    up = solve_interpolator(params.with_delta(d + h)).nu_star
    dn = solve_interpolator(params.with_delta(d - h)).nu_star
    return (up - dn) / (2.0 * h)


# ---------------------------------------------------------------------------
# closed-form limits


def tau0_sq(params: ModelParams) -> float:
    """Zero-estimator risk ``sigma^2 + E[Theta^2]/delta``."""
    return params.tau0_sq


def H_fn(delta: float) -> float:
    """Small-sparsity limit of ``nu*/M`` as a function of ``delta``."""
    if not 0 < delta < 1:
        raise ValueError("H_fn needs 0 < delta < 1")
    a = -Phi_inv(delta / 2.0)
    tail = Phi(-a)
    return math.sqrt(max(a * phi(a) - a * a * tail, 0.0) / tail)


def eps_to_zero_limits(delta: float) -> tuple[float, float]:
    """``(alpha0, nu/M)`` limits as ``epsilon -> 0`` at fixed SNR; depends on delta only."""
    if not 0 < delta < 1:
        raise ValueError("eps_to_zero_limits needs 0 < delta < 1")
    a0 = -Phi_inv(delta / 2.0)
    inner = 1.0 - 2.0 / delta * (-a0 * phi(a0) + (a0 * a0 + 1.0) * Phi(-a0))
    return a0, math.sqrt(max(inner, 0.0))


def eps_to_zero_nu_prime_over_M(delta: float) -> float:
    """Limit of ``nu*'(delta)/M`` as ``epsilon -> 0`` at fixed SNR.

    Its sign is reported, not assumed.
    """
    a0, ratio = eps_to_zero_limits(delta)
    f = phi(a0)
    num = 2.0 / delta**2 * (-2.0 * a0 * f * f + (a0 * a0 + 1.0) * delta * f
                            - 2.0 * delta * f + a0 * delta**2)
    return num / (4.0 * f * ratio)


def ols_limit(delta: float, sigma: float = 1.0) -> float:
    """Least-squares risk ``delta sigma^2 / (delta - 1)`` for ``delta > 1``."""
    if not delta > 1:
        raise ValueError("ols_limit needs delta > 1")
    return delta * sigma**2 / (delta - 1.0)


def l2_interpolator_risk(delta: float, epsilon: float, M: float, sigma: float = 1.0) -> float:
    """Asymptotic risk of the minimum l2-norm interpolator (ridgeless regression)."""
    if delta == 1:
        raise ValueError("the l2 interpolator risk diverges at delta = 1")
    if delta > 1:
        return ols_limit(delta, sigma)
    return epsilon * M**2 * (1.0 - delta) + sigma**2 / (1.0 - delta)


def asymptotic_risk(params: ModelParams) -> float:
    """Limit risk of the minimum-l1 interpolator (or least squares when delta > 1)."""
    if params.delta > 1:
        return ols_limit(params.delta, params.sigma)
    if params.delta == 1:
        return math.inf
    return solve_interpolator(params).tau_sq


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class RiskPoint:
    delta: float
    tau_sq: float
    alpha: float
    nu: float | None
    nu_prime: float | None
    regime: str
    residuals: tuple[float, float] = (0.0, 0.0)
    singular: bool = False

    @property
    def inv_delta(self) -> float:
        return 1.0 / self.delta


@dataclass
class RiskCurve:
    points: list[RiskPoint]
    meta: dict = field(default_factory=dict)
    failures: list[tuple[float, str]] = field(default_factory=list)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def tau_sq(self) -> np.ndarray:
        return np.array([p.tau_sq for p in self.points])

    @property
    def regimes(self) -> list[str]:
        return [p.regime for p in self.points]

    def regime_changes(self) -> int:
        r = self.regimes
        return sum(1 for a, b in zip(r, r[1:]) if a != b)

    def extrema(self) -> tuple[list[float], list[float]]:
        """Interior local maxima and minima of ``tau*^2`` versus ``p/n``, as p/n values."""
        order = np.argsort(1.0 / self.deltas)
        x = (1.0 / self.deltas)[order]
        y = self.tau_sq[order]
        maxima, minima = [], []
        for i in range(1, len(y) - 1):
            if y[i] > y[i - 1] and y[i] >= y[i + 1]:
                maxima.append(float(x[i]))
            elif y[i] < y[i - 1] and y[i] <= y[i + 1]:
                minima.append(float(x[i]))
        return maxima, minima

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([repr(p.delta), repr(p.inv_delta), repr(p.tau_sq), repr(p.alpha),
                        "" if p.nu is None else repr(p.nu),
                        "" if p.nu_prime is None else repr(p.nu_prime), p.regime])
        return buf.getvalue()


def default_grid(n: int = 400, lo: float = 1.01, hi: float = 100.0) -> np.ndarray:
    """Increasing deltas whose reciprocals are log-spaced over ``[lo, hi]``."""
    return np.sort(1.0 / np.geomspace(lo, hi, n))


def _solve_point(args):
    params, delta = args
    p = params.with_delta(float(delta))
    try:
        sol = solve_interpolator(p)
    except (SolverError, ValueError) as exc:
        return delta, None, str(exc)
    npr, singular = None, False
    if p.sparse is not None:
        try:
            npr = nu_prime(p.delta, sol, p)
        except SingularDerivativeError:
            singular = True
    return delta, (sol, npr, singular), None


def sweep(template: ModelParams, deltas=None, *, workers: int = 1) -> RiskCurve:
    """Solve the interpolator system along a grid of aspect ratios in (0, 1).

    Failed points are recorded in ``failures`` and skipped. The regime tag is
    the sign of ``nu'`` (risk falls with ``p/n`` exactly when ``nu' < 0``); for
    general priors and singular points it falls back to finite differences of
    ``tau*^2`` along the grid.
    """
    deltas = default_grid() if deltas is None else np.sort(np.asarray(deltas, dtype=float))
    if np.any((deltas <= 0) | (deltas >= 1)):
        raise ValueError("sweep grid must lie in (0, 1)")
    tasks = [(template, d) for d in deltas]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_solve_point, tasks, chunksize=16))
    else:
        results = [_solve_point(t) for t in tasks]
    points, failures = [], []
    for delta, out, err in results:
        if out is None:
            failures.append((float(delta), err))
            continue
        sol, npr, singular = out
        regime = "" if npr is None else ("descending" if npr < 0 else "ascending")
        points.append(RiskPoint(float(delta), sol.tau_sq, sol.alpha_star, sol.nu_star, npr,
                                regime, sol.residuals, singular))
    _fill_fd_regimes(points)
    meta = {"sigma": template.sigma, "prior": template.prior.to_dict(),
            "sparse": template.sparse, "n_grid": len(deltas)}
    return RiskCurve(points, meta, failures)


def _fill_fd_regimes(points: list[RiskPoint]) -> None:
    # slope of tau^2 against p/n = 1/delta; deltas are increasing
    for i, p in enumerate(points):
        if p.regime:
            continue
        j0, j1 = max(i - 1, 0), min(i + 1, len(points) - 1)
        if j0 == j1:
            p.regime = "descending"
            continue
        a, b = points[j0], points[j1]
        slope = (b.tau_sq - a.tau_sq) / (b.inv_delta - a.inv_delta)
        p.regime = "descending" if slope < 0 else "ascending"


def has_ascending_regime(template: ModelParams, deltas=None) -> bool:
    return any(p.regime == "ascending" for p in sweep(template, deltas).points)


def epsilon_threshold(snr: float, sigma: float = 1.0, deltas=None, *, lo: float = 1e-4,
                      hi: float = 0.5, iters: int = 30) -> float:
    """Bisection over ``epsilon`` for the largest sparsity with an ascending regime.

    Assumes the predicate holds at ``lo`` and fails at ``hi``.
    """
    def pred(eps):
        return has_ascending_regime(ModelParams.sparse_model(0.5, eps, snr=snr, sigma=sigma),
                                    deltas)

    if not pred(lo) or pred(hi):
        raise ValueError("predicate does not change between lo and hi")
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


@dataclass
class AsymptoteRow:
    delta: float
    alpha_star: float
    delta_alpha_over_phi: float
    numerator_alpha3: float
    denominator_scaled: float
    dF1_alpha_over_phi: float
    dF1_delta: float


def asymptote_report(template: ModelParams, deltas=(1e-3, 1e-4, 1e-5)) -> list[AsymptoteRow]:
    """Small-delta diagnostics whose limits are (2, -2, 1, -2, -1) respectively."""
    eps, M, sigma = _sparse(template)
    nu0 = M / math.sqrt(template.with_delta(deltas[0]).tau0_sq)
    rows = []
    for d in deltas:
        p = template.with_delta(d)
        sol = solve_interpolator(p)
        a = sol.alpha_star
        num, den = nu_prime_parts(d, sol, p)
        _, dd1, da1 = partials_F1(sol.nu_star, d, a, eps)
        rows.append(AsymptoteRow(
            delta=d,
            alpha_star=a,
            delta_alpha_over_phi=d * a / phi(a),
            numerator_alpha3=num * a**3,
            denominator_scaled=den * nu0 / (-4.0 * phi(a)),
            dF1_alpha_over_phi=da1 / phi(a),
            dF1_delta=dd1,
        ))
    return rows
