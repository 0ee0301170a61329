"""ABC comparison kernels, summary weighting, and regression-built summaries."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import DcabcError, DegenerateStatisticError, DomainError

logger = logging.getLogger(__name__)


class RegressionError(DcabcError, np.linalg.LinAlgError):
    """A least-squares problem was singular and no fallback was allowed."""


class KernelKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


def as_summary(values) -> np.ndarray:
    """Validate a summary vector: 1-d, finite."""
    s = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(s)):
        raise DomainError(f"summary vector must be finite, got {s}")
    return s


@dataclass(frozen=True)
class WeightMatrix:
    """Diagonal of Omega, i.e. the squared scales omega_j**2."""

    diagonal: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float).reshape(-1)
        if diag.size == 0 or np.any(~np.isfinite(diag)) or np.any(diag <= 0):
            raise DomainError(f"weight diagonal must be finite and positive, got {diag}")
        diag.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)

    @classmethod
    def unit(cls, d_s: int) -> "WeightMatrix":
        return cls(np.ones(d_s))

    @classmethod
    def from_scales(cls, omegas) -> "WeightMatrix":
        """Build from the unsquared scales omega_j."""
        return cls(np.asarray(omegas, dtype=float) ** 2)

    @property
    def scales(self) -> np.ndarray:
        return np.sqrt(self.diagonal)

    def __len__(self):
        return self.diagonal.size

    def to_json(self) -> dict:
        return {"diagonal": [float(v) for v in self.diagonal],
                "omega": [float(v) for v in self.scales]}

    @classmethod
    def from_json(cls, doc: dict) -> "WeightMatrix":
        if "diagonal" in doc:
            return cls(doc["diagonal"])
        return cls.from_scales(doc["omega"])


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    delta: float
    weights: WeightMatrix

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not (self.delta > 0):
            raise DomainError(f"delta must be positive, got {self.delta}")

    def with_delta(self, delta: float) -> "KernelSpec":
        return KernelSpec(self.kind, delta, self.weights)


def weighted_sq_distance(weights: WeightMatrix, s_obs, s_sim) -> np.ndarray:
    """D' Omega^-1 D for one summary or a stack of them (last axis = d_s)."""
    s_sim = np.asarray(s_sim, dtype=float)
    s_obs = np.asarray(s_obs, dtype=float)
    if s_sim.shape[-1] != s_obs.shape[-1] or s_obs.shape[-1] != len(weights):
        raise DomainError(
            f"dimension mismatch: s_obs {s_obs.shape}, s_sim {s_sim.shape}, "
            f"weights {len(weights)}")
    diff = s_sim - s_obs
    return np.sum(diff * diff / weights.diagonal, axis=-1)


def log_kernels_from_sq(kind: KernelKind, delta: float, sq) -> np.ndarray:
    """Log kernel values given precomputed weighted squared distances."""
    sq = np.asarray(sq, dtype=float)
    if kind is KernelKind.GAUSSIAN:
        out = -sq / (2.0 * delta * delta)
    else:
        out = np.where(np.sqrt(sq) <= delta, 0.0, -np.inf)
    # non-finite summaries (failed simulations) can never be accepted
    return np.where(np.isnan(out), -np.inf, out)


def log_kernel(spec: KernelSpec, s_obs, s_sim) -> float:
    """Log of the unnormalised kernel J_delta between two summary vectors.

    The Gaussian kind returns ``-D' Omega^-1 D / (2 delta^2)``; the uniform
    kind returns 0 inside the weighted ball of radius delta and ``-inf``
    outside.  Normalising constants are dropped: only ratios at a fixed
    ``(delta, K)`` enter acceptance probabilities.
    """
    sq = weighted_sq_distance(spec.weights, as_summary(s_obs), np.asarray(s_sim, float).reshape(-1))
    return float(log_kernels_from_sq(spec.kind, spec.delta, sq))


def cloned_log_kernel(spec: KernelSpec, s_obs, s_sims) -> float:
    """Sum of per-clone log kernels, i.e. the log of prod_k J_delta(y, z_k)."""
    sims = np.asarray(s_sims, dtype=float)
    if sims.ndim == 1:
        sims = sims[None, :]
    if sims.shape[0] == 0:
        raise DomainError("need at least one simulated summary")
    sq = weighted_sq_distance(spec.weights, as_summary(s_obs), sims)
    return float(np.sum(log_kernels_from_sq(spec.kind, spec.delta, sq)))


def pilot_weights(accepted_summaries, method: str = "mad", burnin: int = 0) -> WeightMatrix:
    """Estimate the diagonal of Omega from summaries collected in a pilot run.

    Parameters
    ----------
    accepted_summaries : array_like, shape (n, d_s)
        Summaries of the chain's current state at every pilot iteration.
    method : {"mad", "sd"}
        ``mad`` sets omega_j to the median absolute deviation of coordinate j;
        ``sd`` sets omega_j to its sample standard deviation, so that the
        kernel weights coordinate j by 1/sd_j**2.
    burnin : int
        Number of leading rows to discard.

    Returns
    -------
    WeightMatrix
        Diagonal holds omega_j**2.
    """
    s = np.asarray(accepted_summaries, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    s = s[int(burnin):]
    if s.shape[0] < 2:
        raise DomainError("pilot weights need at least two post-burnin summaries")
    if method == "mad":
        omega = np.median(np.abs(s - np.median(s, axis=0)), axis=0)
    elif method == "sd":
        omega = np.std(s, axis=0, ddof=1)
    else:
        raise DomainError(f"unknown weighting method {method!r}")
    bad = np.flatnonzero(~(omega > 0))
    if bad.size:
        raise DegenerateStatisticError(
            f"summary coordinate(s) {[int(b) + 1 for b in bad]} have zero {method} "
            "in the pilot draws")
    return WeightMatrix(omega ** 2)


# -- semi-automatic summaries ------------------------------------------------

def raw_and_squares(obs: np.ndarray) -> np.ndarray:
    """Feature map: flattened observations followed by their squares."""
    obs = np.asarray(obs, dtype=float)
    flat = obs.reshape(obs.shape[0], -1) if obs.ndim == 3 else obs.reshape(1, -1)
    return np.concatenate([flat, flat * flat], axis=1)


def raw_features(obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    return obs.reshape(obs.shape[0], -1) if obs.ndim == 3 else obs.reshape(1, -1)


FEATURE_MAPS = {"raw_and_squares": raw_and_squares, "raw": raw_features}


@dataclass(frozen=True)
class SummaryProjection:
    """Linear map from a dataset's feature vector to one summary per parameter."""

    intercept: np.ndarray
    coefficients: np.ndarray  # (d, n_features)
    features: str = "raw_and_squares"

    def __post_init__(self):
        object.__setattr__(self, "intercept", np.asarray(self.intercept, dtype=float))
        coef = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "coefficients", coef)
        if self.features not in FEATURE_MAPS:
            raise DomainError(f"unknown feature map {self.features!r}")

    @property
    def dim(self) -> int:
        return self.intercept.size

    def project_features(self, feats: np.ndarray) -> np.ndarray:
        return np.atleast_2d(feats) @ self.coefficients.T + self.intercept

    def batch(self, obs: np.ndarray) -> np.ndarray:
        """Summaries for a stack of observation matrices ``(k, n_obs, d_y)``."""
        return self.project_features(FEATURE_MAPS[self.features](obs))

    def __call__(self, data) -> np.ndarray:
        return self.batch(np.asarray(data.observations)[None])[0]

    def to_json(self) -> dict:
        return {"features": self.features,
                "intercept": self.intercept.tolist(),
                "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "SummaryProjection":
        return cls(np.array(doc["intercept"]), np.array(doc["coefficients"]),
                   doc.get("features", "raw_and_squares"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "SummaryProjection":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def solve_least_squares(design: np.ndarray, target: np.ndarray, weights=None,
                        ridge: float | None = 1e-8) -> np.ndarray:
    """Solve (weighted) least squares through the normal equations.

    A rank-deficient design raises :class:`RegressionError` unless ``ridge``
    is given, in which case ``ridge * I`` is added to the normal matrix.
    """
    Z = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if weights is None:
        ZtW = Z.T
    else:
        ZtW = Z.T * np.asarray(weights, dtype=float)
    A = ZtW @ Z
    b = ZtW @ y
    rank = np.linalg.matrix_rank(A)
    if rank < A.shape[0]:
        if ridge is None:
            raise RegressionError(
                f"normal matrix is rank deficient ({rank} < {A.shape[0]})")
        logger.warning("rank-deficient normal matrix (%d < %d); ridge %.1e applied",
                       rank, A.shape[0], ridge)
        A = A + ridge * np.eye(A.shape[0])
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise RegressionError(str(exc)) from exc


def semi_automatic_summaries(pilot_params, pilot_data_features,
                             features: str = "raw_and_squares",
                             ridge: float | None = 1e-8) -> SummaryProjection:
    """Fit one linear summary per parameter by OLS on pilot simulations.

    Parameters
    ----------
    pilot_params : array_like, shape (m, d)
        Parameters used to simulate each pilot dataset.
    pilot_data_features : array_like, shape (m, p)
        Feature vector of each simulated dataset.
    """
    theta = np.atleast_2d(np.asarray(pilot_params, dtype=float))
    feats = np.asarray(pilot_data_features, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    if theta.shape[0] != feats.shape[0]:
        raise DomainError("pilot_params and features need equal row counts")
    # centring keeps the normal equations well conditioned
    f_mean = feats.mean(axis=0)
    f_scale = feats.std(axis=0)
    f_scale[f_scale == 0] = 1.0
    Z = np.column_stack([np.ones(len(feats)), (feats - f_mean) / f_scale])
    beta = solve_least_squares(Z, theta, ridge=ridge)
    coef = (beta[1:] / f_scale[:, None]).T
    intercept = beta[0] - coef @ f_mean
    return SummaryProjection(intercept, coef, features)
