"""Generalized AMP for the minimum-l1 interpolator with a decaying lambda schedule."""

from __future__ import annotations

import bisect
import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .fixed_point import solve_lasso, state_evolution_map
from .prior import ModelParams
from .special import Phi, phi, soft_threshold

TRACE_HEADER = ("t", "lambda", "zeta", "tau_t", "alpha_star_t", "tau_star_t", "increment",
                "sg_score")
MAX_PIECES = 10_000_000


class AmpDivergenceError(FloatingPointError):
    """Non-finite iterate; ``trace`` holds the rows recorded so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


# ---------------------------------------------------------------------------
# lambda schedules


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class LambdaSchedule:
    """Piecewise-constant schedule ``lambda_t = mu_k`` for ``S_{k-1} < t <= S_k``.

    Pieces are generated lazily, so ``schedule(t)`` works for any ``t >= 1``.

    Parameters
    ----------
    piece_value : callable ``k -> mu_k`` (``k >= 1``)
    piece_length : callable ``(k, mu_k) -> s_k`` returning an integer ``>= 1``
    """

    def __init__(self, piece_value: Callable[[int], float],
                 piece_length: Callable[[int, float], int], name: str = "custom"):
        self.piece_value = piece_value
        self.piece_length = piece_length
        self.name = name
        self._mu: list[float] = []
        self._S: list[int] = [0]
        self._Lam: list[float] = [0.0]  # Lambda at piece boundaries

    def _add_piece(self) -> None:
        k = len(self._mu) + 1
        if k > MAX_PIECES:
            raise OverflowError("schedule piece limit reached")
        mu = float(self.piece_value(k))
        s = int(self.piece_length(k, mu))
        if not mu > 0 or s < 1:
            raise ValueError(f"invalid piece {k}: mu={mu}, length={s}")
        self._mu.append(mu)
        self._S.append(self._S[-1] + s)
        self._Lam.append(self._Lam[-1] + s * mu)

    def _extend_to(self, t: int) -> None:
        while self._S[-1] < t:
            self._add_piece()

    def _extend_pieces(self, k: int) -> None:
        while len(self._mu) < k:
            self._add_piece()

    def piece_index(self, t: int) -> int:
        """1-based piece containing iteration ``t``."""
        if t < 1:
            raise ValueError("schedule starts at t = 1")
        self._extend_to(t)
        return bisect.bisect_left(self._S, t)

    def __call__(self, t: int) -> float:
        return self._mu[self.piece_index(t) - 1]

    value = __call__

    def piece(self, k: int) -> tuple[float, int]:
        """``(mu_k, s_k)``."""
        self._extend_pieces(k)
        return self._mu[k - 1], self._S[k] - self._S[k - 1]

    def boundary(self, k: int) -> int:
        """``S_k``, the last iteration of piece ``k``."""
        self._extend_pieces(k)
        return self._S[k]

    def partial_sum(self, t: int) -> float:
        """``Lambda_t = sum_{s <= t} lambda_s``."""
        if t == 0:
            return 0.0
        k = self.piece_index(t)
        return self._Lam[k - 1] + (t - self._S[k - 1]) * self._mu[k - 1]

    def l_t(self, t: int, c: float = 1.0) -> float:
        """Diagnostic ``sum_{s<=t} |lambda_s - lambda_{s+1}| exp(-c (Lambda_t - Lambda_s))``."""
        self._extend_to(t + 1)
        lam_t = self.partial_sum(t)
        total = 0.0
        for j in range(1, len(self._S)):
            s = self._S[j]
            if s > t:
                break
            jump = abs(self._mu[j - 1] - self(s + 1))
            total += jump * math.exp(-c * (lam_t - self._Lam[j]))
        return total

    def first_below(self, lam: float) -> int:
        """First ``t`` with ``lambda_t <= lam``."""
        k = 1
        while self.piece(k)[0] > lam:
            k += 1
        return self._S[k - 1] + 1


def example_schedule() -> LambdaSchedule:
    """``mu_k = 1/max(log k, 1)`` with piece lengths chosen so ``Lambda_{S_k} ~ k^3``."""

    def value(k):
        return 1.0 / max(math.log(k), 1.0)

    def length(k, mu):
        # round against the running total so Lambda_{S_k} stays within mu_k / 2 of k^3
        return max(1, _round_half_up((k**3 - sched._Lam[-1]) / mu))

    sched = LambdaSchedule(value, length, "example")
    return sched


def power_schedule(lam0: float = 1.0, power: float = 1.0, piece_length: int = 1) -> LambdaSchedule:
    """``mu_k = lam0 k^(-power)`` with fixed piece length; ratios across pieces tend to 1."""
    if not lam0 > 0 or not power > 0 or piece_length < 1:
        raise ValueError("need lam0 > 0, power > 0, piece_length >= 1")
    return LambdaSchedule(lambda k: lam0 * k ** (-power), lambda k, mu: piece_length,
                          f"power(lam0={lam0:g}, power={power:g}, len={piece_length})")


def constant_schedule(lam: float) -> LambdaSchedule:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return LambdaSchedule(lambda k: lam, lambda k, mu: 1_000_000, f"constant({lam:g})")


# ---------------------------------------------------------------------------
# per-iteration fixed points


@lru_cache(maxsize=8192)
def _fixed_point_cached(lam: float, params: ModelParams) -> tuple[float, float]:
    sol = solve_lasso(lam, params)
    return sol.alpha_star, sol.tau_star


def per_iteration_fixed_point(lambda_t: float, params: ModelParams) -> tuple[float, float]:
    """``(alpha*_t, tau*_t)`` of the Lasso fixed point at ``lambda_t``."""
    if lambda_t < 0:
        raise ValueError("lambda_t must be nonnegative")
    return _fixed_point_cached(float(lambda_t), params)


# ---------------------------------------------------------------------------
# state evolution and covariance recursion


def _eta_mean(m, sd, zeta):
    """``E[eta(m + sd W; zeta)]`` for standard normal ``W`` (vectorized in ``m``)."""
    m = np.asarray(m, dtype=float)
    if sd <= 0.0:
        return soft_threshold(m, zeta)
    a = (zeta - m) / sd
    b = (-zeta - m) / sd
    return (m - zeta) * Phi(-a) + sd * phi(a) + (m + zeta) * Phi(b) - sd * phi(b)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)
_U_MAX = 12.0
_U_FIXED = np.arange(-_U_MAX, _U_MAX + 1e-9, 3.0)


def _outer_integral(f, breaks):
    """``E[f(U)]`` for standard normal ``U`` by Gauss-Legendre split at ``breaks``."""
    pts = np.unique(np.concatenate([_U_FIXED, np.clip(breaks, -_U_MAX, _U_MAX)]))
    lo, hi = pts[:-1], pts[1:]
    keep = hi - lo > 1e-15
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    u = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_NODES[None, :]
    w = half[:, None] * _GL_WEIGHTS[None, :] * phi(u)
    return float(np.sum(w * f(u)))


def pair_expectation(params: ModelParams, zeta_s: float, zeta_t: float, var_s: float,
                     var_t: float, cov: float) -> float:
    """``E[(eta(Theta + Z_s; zeta_s) - Theta)(eta(Theta + Z_t; zeta_t) - Theta)]``.

    ``(Z_s, Z_t)`` is a centered Gaussian pair independent of ``Theta``. The
    inner expectation over ``Z_t | Z_s`` is closed form; the outer one is a
    one-dimensional Gauss-Legendre rule split at every kink, which is exact to
    rounding for the piecewise-linear integrands that occur on the diagonal.
    """
    ss, st = math.sqrt(var_s), math.sqrt(var_t)
    rho = cov / (ss * st)
    if 1.0 < abs(rho) <= 1.0 + 1e-13:
        rho = math.copysign(1.0, rho)  # rounding in cov / (ss * st)
    elif abs(rho) > 1.0:
        warnings.warn(f"covariance correlation {rho!r} clipped", RuntimeWarning, stacklevel=2)
        rho = math.copysign(1.0 - 1e-12, rho)
    k = rho * st / ss
    sd = st * math.sqrt(max(1.0 - rho * rho, 0.0))
    total = 0.0
    for v, p in params.prior.atoms:
        if p == 0:
            continue
        breaks = [(zeta_s - v) / ss, (-zeta_s - v) / ss]
        if k != 0.0:
            breaks += [(zeta_t - v) / (k * ss), (-zeta_t - v) / (k * ss)]

        def f(u, v=v):
            x = ss * u
            first = soft_threshold(v + x, zeta_s) - v
            second = _eta_mean(v + k * x, sd, zeta_t) - v
            return first * second

        total += p * _outer_integral(f, np.array(breaks))
    return total


def _boundary_expectation(params: ModelParams, zeta_t: float, var_t: float) -> float:
    """``E[(eta(Theta + Z_t; zeta_t) - Theta)(-Theta)]``."""
    st = math.sqrt(var_t)
    return math.fsum(p * (-v) * (float(_eta_mean(v, st, zeta_t)) - v)
                     for v, p in params.prior.atoms if p > 0)


@dataclass
class CovarianceTrace:
    """Sliding window of the covariance recursion ``R_{s,t}``."""

    params: ModelParams
    window: int = 64
    R: dict = field(default_factory=dict)
    zeta: dict = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        if not self.R:
            self.R[(0, 0)] = self.params.tau0_sq

    def __getitem__(self, key):
        s, t = key
        return self.R[(min(s, t), max(s, t))]

    def indices(self) -> range:
        return range(max(0, self.t - self.window + 1), self.t + 1)

    def advance(self, zeta_t: float) -> None:
        """Record ``zeta`` for the newest index and compute the next row."""
        self.zeta[self.t] = zeta_t
        t1 = self.t + 1
        row = {}
        for s1 in range(max(0, t1 - self.window + 1), t1 + 1):
            row[(s1, t1)] = covariance_step(s1 - 1, t1 - 1, self, self.params)
        self.R.update(row)
        self.t = t1
        lo = t1 - self.window + 1
        for key in [k for k in self.R if k[0] < lo]:
            del self.R[key]
        for key in [k for k in self.zeta if k < lo - 1]:
            del self.zeta[key]


def covariance_step(s: int, t: int, trace: CovarianceTrace, params: ModelParams) -> float:
    """``R_{s+1,t+1}``; ``s = -1`` gives the boundary row ``R_{0,t+1}``."""
    delta, sigma = params.delta, params.sigma
    if s == -1:
        return sigma**2 + _boundary_expectation(params, trace.zeta[t], trace[t, t]) / delta
    if s == t:
        var = trace[t, t]
        return sigma**2 + pair_expectation(params, trace.zeta[t], trace.zeta[t], var, var,
                                           var) / delta
    return sigma**2 + pair_expectation(params, trace.zeta[s], trace.zeta[t], trace[s, s],
                                       trace[t, t], trace[s, t]) / delta


@dataclass
class SERun:
    """Scalar state-evolution trajectory; index ``t`` runs over ``0..T``."""

    tau_sq: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    alpha_star: np.ndarray
    tau_star: np.ndarray
    covariance_diag: np.ndarray | None = None
    covariance: CovarianceTrace | None = None

    @property
    def tau(self) -> np.ndarray:
        return np.sqrt(self.tau_sq)


def state_evolution_run(schedule: LambdaSchedule, params: ModelParams, T: int, *,
                        covariance: bool = False, window: int = 64) -> SERun:
    """``tau_{t+1}^2 = F(tau_t^2, zeta_t)`` from ``tau_0^2 = sigma^2 + E[Theta^2]/delta``.

    ``zeta_0 = 1`` and ``zeta_t = alpha*_t tau_t`` afterwards, where ``alpha*_t``
    is the Lasso fixed point at ``lambda_t``. With ``covariance=True`` the
    covariance recursion is carried along and its diagonal returned.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    tau_sq = np.empty(T + 1)
    zeta = np.empty(T + 1)
    lam = np.full(T + 1, np.nan)
    a_star = np.full(T + 1, np.nan)
    t_star = np.full(T + 1, np.nan)
    tau_sq[0] = params.tau0_sq
    zeta[0] = 1.0
    cov = CovarianceTrace(params, window) if covariance else None
    diag = np.empty(T + 1) if covariance else None
    if covariance:
        diag[0] = cov[0, 0]
    for t in range(T):
        tau_sq[t + 1] = state_evolution_map(tau_sq[t], zeta[t], params)
        lam[t + 1] = schedule(t + 1)
        a_star[t + 1], t_star[t + 1] = per_iteration_fixed_point(lam[t + 1], params)
        zeta[t + 1] = a_star[t + 1] * math.sqrt(tau_sq[t + 1])
        if covariance:
            cov.advance(zeta[t])
            diag[t + 1] = cov[t + 1, t + 1]
    return SERun(tau_sq, zeta, lam, a_star, t_star, diag, cov)


# ---------------------------------------------------------------------------
# AMP iteration


@dataclass
class TraceRow:
    t: int
    lam: float
    zeta: float
    tau_t: float
    alpha_star_t: float
    tau_star_t: float
    increment: float
    sg_score: float


@dataclass
class AmpRun:
    params: ModelParams
    schedule: LambdaSchedule
    theta: np.ndarray
    z: np.ndarray
    t: int = 0
    tau_sq: float = 0.0
    zeta: float = 1.0
    lambda_t: float = math.nan
    theta_prev: np.ndarray | None = None
    z_prev: np.ndarray | None = None
    zeta_prev: float = math.nan
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def tau_t(self) -> float:
        return math.sqrt(self.tau_sq)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.trace:
            w.writerow([r.t, repr(r.lam), repr(r.zeta), repr(r.tau_t), repr(r.alpha_star_t),
                        repr(r.tau_star_t), repr(r.increment), repr(r.sg_score)])
        return buf.getvalue()


def init_run(X, y, params: ModelParams, schedule: LambdaSchedule) -> AmpRun:
    """``theta^0 = 0`` and ``z^{-1} = 0``, hence ``z^0 = y``; ``zeta_0 = 1``."""
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("y must have length n")
    return AmpRun(params, schedule, np.zeros(p), np.array(y, dtype=float), 0,
                  params.tau0_sq, 1.0)


def _subgradient(X, y, theta, theta_prev, z_prev, zeta_prev, lam):
    s = (theta_prev + X.T @ z_prev - theta) / zeta_prev
    return lam * s - X.T @ (y - X @ theta)


def subgradient_score(run: AmpRun, X, y) -> float:
    """``||lambda_t s^t - X^T (y - X theta^t)|| / (sqrt(p) lambda_t)``."""
    if run.t < 1:
        raise ValueError("the subgradient score needs t >= 1")
    sg = _subgradient(X, y, run.theta, run.theta_prev, run.z_prev, run.zeta_prev, run.lambda_t)
    return float(np.linalg.norm(sg) / (math.sqrt(X.shape[1]) * run.lambda_t))


def amp_step(run: AmpRun, X, y) -> AmpRun:
    """One synchronous AMP update; the run is modified in place and returned."""
    with np.errstate(invalid="ignore", over="ignore"):
        return _amp_step(run, X, y)


def _amp_step(run: AmpRun, X, y) -> AmpRun:
    n, p = X.shape
    v = X.T @ run.z + run.theta
    theta_new = soft_threshold(v, run.zeta)
    onsager = np.count_nonzero(np.abs(v) > run.zeta) / n
    z_new = y - X @ theta_new + onsager * run.z
    tau_sq_new = state_evolution_map(run.tau_sq, run.zeta, run.params)
    t1 = run.t + 1
    lam = run.schedule(t1)
    a_star, t_star = per_iteration_fixed_point(lam, run.params)

    diff = theta_new - run.theta
    run.theta_prev, run.z_prev, run.zeta_prev = run.theta, run.z, run.zeta
    run.theta, run.z, run.t = theta_new, z_new, t1
    run.tau_sq, run.lambda_t = tau_sq_new, lam
    run.zeta = a_star * math.sqrt(tau_sq_new)
    increment = float(diff @ diff) / (p * lam * lam)
    score = subgradient_score(run, X, y)
    run.trace.append(TraceRow(t1, lam, run.zeta, run.tau_t, a_star, t_star, increment, score))
    if not (np.all(np.isfinite(theta_new)) and np.all(np.isfinite(z_new))):
        raise AmpDivergenceError(f"non-finite iterate at t={t1}", run.trace)
    return run


def run_amp(X, y, params: ModelParams, schedule: LambdaSchedule, *, lam_stop: float = 1e-2,
            inc_tol: float = 5e-2, max_iter: int = 100_000) -> AmpRun:
    """Iterate until ``lambda_t <= lam_stop`` and the normalized increment ``<= inc_tol``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    run = init_run(X, y, params, schedule)
    while run.t < max_iter:
        amp_step(run, X, y)
        row = run.trace[-1]
        if row.lam <= lam_stop and row.increment <= inc_tol:
            break
    return run
