"""Signal priors and model parameters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Prior:
    """Finite mixture of point masses ``sum_i p_i delta_{v_i}``.

    Atoms with zero probability are kept (the sparse constructor produces one
    when ``epsilon = 1``) but never contribute to an expectation.
    """

    atoms: tuple[tuple[float, float], ...]
    label: str | None = None

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        if not atoms:
            raise ValueError("prior needs at least one atom")
        probs = [p for _, p in atoms]
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ValueError("atom probabilities must be nonnegative")
        if any(not math.isfinite(v) for v, _ in atoms):
            raise ValueError("atom values must be finite")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def nonzero_mass(self) -> float:
        return math.fsum(p for v, p in self.atoms if v != 0.0)

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v, _ in self.atoms)

    def expect(self, f: Callable[[float], float]) -> float:
        return math.fsum(p * f(v) for v, p in self.atoms if p > 0)

    def second_moment(self) -> float:
        return math.fsum(p * v * v for v, p in self.atoms)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        vals, probs = self.values, self.probs
        if len(vals) == 1:
            return np.full(size, vals[0])
        # inverse-CDF draw: one uniform per coordinate
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return vals[np.minimum(idx, len(vals) - 1)]

    def to_dict(self) -> dict:
        d = {"atoms": [[v, p] for v, p in self.atoms]}
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "Prior":
        return cls(tuple((v, p) for v, p in doc["atoms"]), doc.get("label"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Prior":
        return cls.from_dict(json.loads(text))


def second_moment(prior: Prior) -> float:
    return prior.second_moment()


def expect_over_theta(prior: Prior, f: Callable[[float], float]) -> float:
    return prior.expect(f)


def sparse_prior(epsilon: float, M: float, delta: float) -> Prior:
    """Two-point prior ``epsilon * delta_{M sqrt(delta)} + (1 - epsilon) * delta_0``."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if not M > 0:
        raise ValueError("M must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    return Prior(
        ((M * math.sqrt(delta), epsilon), (0.0, 1.0 - epsilon)),
        label=f"sparse(eps={epsilon:g}, M={M:g})",
    )


def magnitude_from_snr(snr: float, epsilon: float, sigma: float = 1.0) -> float:
    """``M`` such that ``epsilon M^2 / sigma^2 = snr``."""
    return math.sqrt(snr / epsilon) * sigma


@dataclass(frozen=True)
class ModelParams:
    """One asymptotic problem: aspect ratio ``delta = n/p``, noise level, prior."""

    delta: float
    sigma: float
    prior: Prior
    # (epsilon, M) when the prior came from sparse_prior; enables nu coordinates
    sparse: tuple[float, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def sparse_model(cls, delta: float, epsilon: float, *, M: float | None = None,
                     snr: float | None = None, sigma: float = 1.0) -> "ModelParams":
        """Sparse model from ``M`` or ``snr`` (``snr`` wins when both are given)."""
        if snr is not None:
            M = magnitude_from_snr(snr, epsilon, sigma)
        if M is None:
            raise ValueError("one of M or snr is required")
        return cls(delta, sigma, sparse_prior(epsilon, M, delta), sparse=(epsilon, M))

    def with_delta(self, delta: float) -> "ModelParams":
        """Same model at another aspect ratio; sparse priors are rebuilt for it."""
        if self.sparse is not None:
            eps, M = self.sparse
            return ModelParams(delta, self.sigma, sparse_prior(eps, M, delta), self.sparse)
        return ModelParams(delta, self.sigma, self.prior)

    @property
    def snr(self) -> float:
        return self.prior.second_moment() / (self.delta * self.sigma**2)

    @property
    def tau0_sq(self) -> float:
        """Risk of the zero estimator, ``sigma^2 + E[Theta^2]/delta``."""
        return self.sigma**2 + self.prior.second_moment() / self.delta
