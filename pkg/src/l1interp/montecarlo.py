"""Finite-sample harness: instances, basis pursuit, Lasso, risk and figure sweeps."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import kernels
from .fixed_point import SolverError, solve_lasso
from .prior import ModelParams
from .risk_curve import asymptotic_risk
from .special import soft_threshold

AGGREGATE_HEADER = ("p_over_n", "n", "p", "trials", "mean_risk", "stderr_risk", "theory_risk",
                    "mean_support_frac", "solver")
STREAM_X, STREAM_THETA, STREAM_NOISE = 0, 1, 2
DESIGNS = ("gaussian", "bernoulli", "t3")
SOLVERS = ("bp-admm", "lasso-cd", "amp")


class BasisPursuitError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class LassoError(RuntimeError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *key)``; independent of call order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


@dataclass
class Instance:
    X: np.ndarray
    theta_star: np.ndarray
    z: np.ndarray
    y: np.ndarray
    seed: int
    trial: tuple = ()
    sigma: float = 1.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def design_matrix(rng: np.random.Generator, n: int, p: int, design: str = "gaussian") -> np.ndarray:
    """``n x p`` matrix with i.i.d. entries of mean 0 and variance ``1/n``."""
    if design == "gaussian":
        return rng.standard_normal((n, p)) / math.sqrt(n)
    if design == "bernoulli":
        return (2.0 * rng.integers(0, 2, size=(n, p)) - 1.0) / math.sqrt(n)
    if design == "t3":
        return rng.standard_t(3, size=(n, p)) / math.sqrt(3.0 * n)
    raise ValueError(f"unknown design {design!r}; expected one of {DESIGNS}")


def gen_instance(n: int, p: int, params: ModelParams, seed: int, *, trial: tuple = (),
                 design: str = "gaussian", sigma: float | None = None) -> Instance:
    """Draw ``(X, theta*, z)`` and set ``y = X theta* + z``.

    The prior is rebuilt at ``delta = n/p``. ``sigma`` overrides the noise level
    (``0`` gives noiseless data). Each component uses its own stream keyed by
    ``(seed, *trial, tag)``.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    sigma = params.sigma if sigma is None else float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    prior = params.with_delta(n / p).prior
    X = design_matrix(stream(seed, *trial, STREAM_X), n, p, design)
    theta = prior.sample(stream(seed, *trial, STREAM_THETA), p)
    z = sigma * stream(seed, *trial, STREAM_NOISE).standard_normal(n)
    return Instance(X, theta, z, X @ theta + z, seed, tuple(trial), sigma)


def risk_of(theta_hat, inst: Instance, sigma: float | None = None, n: int | None = None) -> float:
    """``||theta_hat - theta*||^2 / n + sigma^2``."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != inst.theta_star.shape:
        raise ValueError("dimension mismatch")
    sigma = inst.sigma if sigma is None else sigma
    n = inst.n if n is None else n
    d = theta_hat - inst.theta_star
    return float(d @ d) / n + sigma**2


# ---------------------------------------------------------------------------
# basis pursuit


@dataclass
class BPResult:
    theta: np.ndarray
    iters: int
    residual: float
    certified: bool
    rho: float
    method: str = "admm"


def _certify(X, y, w, tol=1e-9):
    """Least squares on the support of ``w`` plus a dual-certificate check.

    Returns the vertex when it is feasible, sign-consistent and optimal.
    """
    n = X.shape[0]
    S = np.flatnonzero(w)
    if S.size != n:
        return None
    XS = X[:, S]
    try:
        lu = scipy.linalg.lu_factor(XS, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        return None
    th = scipy.linalg.lu_solve(lu, y, check_finite=False)
    sgn = np.sign(th)
    if not np.array_equal(sgn, np.sign(w[S])):
        return None
    nu = scipy.linalg.lu_solve(lu, sgn, trans=1, check_finite=False)
    if np.max(np.abs(X.T @ nu)) > 1.0 + tol:
        return None
    out = np.zeros(X.shape[1])
    out[S] = th
    if np.linalg.norm(X @ out - y) > 1e-10 * max(np.linalg.norm(y), 1e-300):
        return None
    return out


def basis_pursuit(X, y, *, tol: float = 1e-8, rho: float = 1.0, max_iter: int = 10_000,
                  certify_every: int = 25, fallback: bool = True) -> BPResult:
    """``argmin ||theta||_1`` subject to ``X theta = y`` by ADMM.

    The theta-step projects onto the affine set with a Cholesky factor of
    ``X X^T``; the w-step soft-thresholds; the scaled dual accumulates the gap.
    The penalty adapts by residual balancing. Every ``certify_every``
    iterations the current support is tried as an LP vertex with a dual
    certificate, which ends the run exactly when it succeeds.

    A near-tie in the dual (an off-support column with ``|X^T nu|`` just
    below 1) can stall ADMM; with ``fallback=True`` the LP is then handed to
    the HiGHS simplex solver once ``max_iter`` is spent.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("y must have length n")
    if p <= n:
        theta = np.linalg.lstsq(X, y, rcond=None)[0]
        return BPResult(theta, 0, _rel_residual(X, y, theta), False, rho, "lstsq")
    try:
        chol = scipy.linalg.cho_factor(X @ X.T, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise BasisPursuitError("X X^T is numerically singular") from exc

    def project(v):
        return v - X.T @ scipy.linalg.cho_solve(chol, X @ v - y, check_finite=False)

    thr = tol * math.sqrt(p)
    w = np.zeros(p)
    u = np.zeros(p)
    r_norm = s_norm = math.inf
    for it in range(1, max_iter + 1):
        x = project(w - u)
        w_old = w
        w = soft_threshold(x + u, 1.0 / rho)
        u = u + x - w
        r_norm = float(np.linalg.norm(x - w))
        s_norm = rho * float(np.linalg.norm(w - w_old))
        if r_norm <= thr and s_norm <= thr:
            return _finish(X, y, x, w, it, rho)
        if it % certify_every == 0:
            cert = _certify(X, y, w)
            if cert is not None:
                return BPResult(cert, it, _rel_residual(X, y, cert), True, rho)
        if r_norm > 10.0 * s_norm:
            rho *= 2.0
            u /= 2.0
        elif s_norm > 10.0 * r_norm:
            rho /= 2.0
            u *= 2.0
    if fallback:
        return _bp_linprog(X, y, max_iter, rho)
    raise BasisPursuitError(f"no convergence in {max_iter} iterations",
                            residuals=(r_norm, s_norm))


def _bp_linprog(X, y, iters, rho):
    """Exact LP solve with ``theta = a - b``, ``a, b >= 0``."""
    p = X.shape[1]
    res = scipy.optimize.linprog(np.ones(2 * p), A_eq=np.hstack([X, -X]), b_eq=y,
                                 bounds=(0, None), method="highs")
    if res.status != 0:
        raise BasisPursuitError(f"LP fallback failed: {res.message}")
    theta = res.x[:p] - res.x[p:]
    theta[np.abs(theta) <= 1e-13 * max(1.0, float(np.max(np.abs(theta))))] = 0.0
    cert = _certify(X, y, theta)
    if cert is not None:
        return BPResult(cert, iters, _rel_residual(X, y, cert), True, rho, "highs")
    return BPResult(theta, iters, _rel_residual(X, y, theta), False, rho, "highs")


def _finish(X, y, x, w, it, rho):
    cert = _certify(X, y, w)
    if cert is not None:
        return BPResult(cert, it, _rel_residual(X, y, cert), True, rho)
    # x is exactly feasible, w exactly sparse; they agree to the tolerance
    return BPResult(x, it, _rel_residual(X, y, x), False, rho)


def _rel_residual(X, y, theta):
    ny = np.linalg.norm(y)
    r = np.linalg.norm(X @ theta - y)
    return float(r / ny) if ny > 0 else float(r)


def min_l1_interpolator(inst: Instance, **opts) -> np.ndarray:
    """Minimum l1-norm interpolator (least squares when ``p <= n``)."""
    return basis_pursuit(inst.X, inst.y, **opts).theta


def bp_enumeration_oracle(X, y) -> tuple[np.ndarray, float]:
    """Exact basis pursuit by enumerating size-``n`` supports (``p <= 12``)."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p > 12:
        raise ValueError("enumeration is limited to p <= 12")
    best, best_val = None, math.inf
    for S in itertools.combinations(range(p), min(n, p)):
        XS = X[:, S]
        if np.linalg.matrix_rank(XS) < len(S):
            continue
        th = np.linalg.lstsq(XS, y, rcond=None)[0]
        if np.linalg.norm(XS @ th - y) > 1e-9 * max(1.0, np.linalg.norm(y)):
            continue
        val = float(np.abs(th).sum())
        if val < best_val:
            best_val = val
            best = np.zeros(p)
            best[list(S)] = th
    if best is None:
        raise ValueError("no feasible support")
    return best, best_val


# ---------------------------------------------------------------------------
# Lasso


def lasso_cd(inst_or_X, y_or_lam, lam=None, *, tol: float = 1e-8, max_sweeps: int = 100_000,
             theta0=None, path: bool = True) -> np.ndarray:
    """Lasso ``0.5 ||y - X theta||^2 + lam ||theta||_1`` by cyclic coordinate descent.

    Accepts ``(inst, lam)`` or ``(X, y, lam)``. With ``path=True`` small ``lam``
    is reached by warm starts along a geometric sequence from ``||X^T y||_inf``.
    Stops when the largest KKT violation is ``<= tol``.
    """
    if isinstance(inst_or_X, Instance):
        X, y, lam = inst_or_X.X, inst_or_X.y, y_or_lam
    else:
        X, y = inst_or_X, y_or_lam
    X = np.asfortranarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    theta = np.zeros(X.shape[1]) if theta0 is None else np.array(theta0, dtype=float)
    lam_max = float(np.max(np.abs(X.T @ y))) if y.size else 0.0
    if lam >= lam_max and theta0 is None:
        return theta
    lams = [lam]
    if path and theta0 is None:
        k = max(int(math.ceil(math.log10(lam_max / lam) * 4)), 1)
        lams = list(np.geomspace(lam_max, lam, k + 1)[1:])
    for i, lv in enumerate(lams):
        last = i == len(lams) - 1
        sweeps, kkt = kernels.lasso_cd(X, y, float(lv), theta, tol if last else max(tol, 1e-6 * lv),
                                       max_sweeps)
        if last and kkt > tol:
            raise LassoError(f"KKT violation {kkt:.3e} after {sweeps} sweeps")
    return theta


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SimRecord:
    n: int
    p: int
    seed: int
    risk: float
    support_fraction: float
    l1_norm_per_p: float
    solver: str
    iters: int
    residual: float
    zero_risk: float = math.nan


@dataclass
class FigureConfig:
    p_over_n: tuple
    n: int = 100
    trials: int = 30
    epsilon: float = 0.01
    snr: float | None = 2.0
    M: float | None = None
    sigma: float = 1.0
    solver: str = "bp-admm"
    lam: float = 0.0
    design: str = "gaussian"
    seed: int = 0
    workers: int = 1
    amp_lam_stop: float = 1e-2

    def params(self) -> ModelParams:
        return ModelParams.sparse_model(0.5, self.epsilon, M=self.M, snr=self.snr,
                                        sigma=self.sigma)

    def dims(self, ratio: float) -> tuple[int, int]:
        return self.n, max(1, int(round(self.n * ratio)))


@dataclass
class GridAggregate:
    p_over_n: float
    n: int
    p: int
    trials: int
    mean_risk: float
    stderr_risk: float
    theory_risk: float
    mean_support_frac: float
    solver: str
    failures: int = 0
    mean_zero_risk: float = math.nan
    stderr_zero_risk: float = math.nan
    tau0_sq: float = math.nan
    records: list = field(default_factory=list, repr=False)


def run_trial(cfg: FigureConfig, grid_index: int, trial: int) -> SimRecord | str:
    """One instance and solve; returns an error string on solver failure."""
    n, p = cfg.dims(cfg.p_over_n[grid_index])
    params = cfg.params().with_delta(n / p)
    inst = gen_instance(n, p, params, cfg.seed, trial=(grid_index, trial), design=cfg.design)
    try:
        if cfg.solver == "bp-admm":
            res = basis_pursuit(inst.X, inst.y)
            theta, iters = res.theta, res.iters
        elif cfg.solver == "lasso-cd":
            theta, iters = lasso_cd(inst, cfg.lam), 0
        elif cfg.solver == "amp":
            from .amp import power_schedule, run_amp
            run = run_amp(inst.X, inst.y, params, power_schedule(1.0, 1.0, 4),
                          lam_stop=cfg.amp_lam_stop, max_iter=5000)
            theta, iters = run.theta, run.t
        else:
            raise ValueError(f"unknown solver {cfg.solver!r}")
    except (BasisPursuitError, LassoError, SolverError, FloatingPointError) as exc:
        return f"{type(exc).__name__}: {exc}"
    return SimRecord(n, p, cfg.seed, risk_of(theta, inst),
                     float(np.count_nonzero(theta)) / p, float(np.abs(theta).sum()) / p,
                     cfg.solver, iters, _rel_residual(inst.X, inst.y, theta),
                     risk_of(np.zeros(p), inst))


def _trial_task(args):
    return run_trial(*args)


def theory_risk(cfg: FigureConfig, n: int, p: int) -> float:
    params = cfg.params().with_delta(n / p)
    if params.delta == 1:
        return math.inf
    if cfg.solver == "lasso-cd" and cfg.lam > 0:
        if params.delta >= 1:
            return math.nan
        return solve_lasso(cfg.lam, params).tau_sq
    return asymptotic_risk(params)


def figure_sweep(cfg: FigureConfig) -> list[GridAggregate]:
    """Monte Carlo risk per grid point, paired with the asymptotic prediction.

    Records are produced in a fixed order, so results do not depend on
    ``cfg.workers``.
    """
    if cfg.solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    tasks = [(cfg, g, t) for g in range(len(cfg.p_over_n)) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_trial_task, tasks, chunksize=1))
    else:
        results = [_trial_task(t) for t in tasks]
    out = []
    for g, ratio in enumerate(cfg.p_over_n):
        n, p = cfg.dims(ratio)
        chunk = results[g * cfg.trials:(g + 1) * cfg.trials]
        recs = [r for r in chunk if isinstance(r, SimRecord)]
        risks = np.array([r.risk for r in recs])
        zeros = np.array([r.zero_risk for r in recs])
        k = len(recs)
        out.append(GridAggregate(
            p_over_n=float(ratio), n=n, p=p, trials=k,
            mean_risk=float(risks.mean()) if k else math.nan,
            stderr_risk=float(risks.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan,
            theory_risk=theory_risk(cfg, n, p),
            mean_support_frac=float(np.mean([r.support_fraction for r in recs])) if k else math.nan,
            solver=cfg.solver, failures=len(chunk) - k,
            mean_zero_risk=float(zeros.mean()) if k else math.nan,
            stderr_zero_risk=float(zeros.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan,
            tau0_sq=cfg.params().with_delta(n / p).tau0_sq,
            records=recs,
        ))
    return out


def aggregate_csv(rows: list[GridAggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for r in rows:
        w.writerow([repr(r.p_over_n), r.n, r.p, r.trials, repr(r.mean_risk), repr(r.stderr_risk),
                    repr(r.theory_risk), repr(r.mean_support_frac), r.solver])
    return buf.getvalue()
