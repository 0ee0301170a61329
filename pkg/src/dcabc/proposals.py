"""Parameter proposals: adaptive Gaussian random walk and Gaussian independence sampler."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DomainError, NumericalError, ParameterVector, RandomSource


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not positive definite: {exc}") from exc


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, ParameterVector) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class AdaptiveRWState:
    """Adaptive Metropolis random walk in the style of Haario et al.

    ``covariance`` is the proposal covariance itself.  Adaptation replaces it
    with ``scale * cov(history) + jitter * I``; before the first adaptation it
    holds whatever initial covariance the caller supplied.
    """

    covariance: np.ndarray
    running_mean: np.ndarray | None = None
    sample_count: int = 0
    adapt_interval: int | None = 1000
    scale: float | None = None
    jitter: float = 1e-10

    def __post_init__(self):
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise DomainError("covariance must be square")
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        if self.scale is None:
            object.__setattr__(self, "scale", 2.38 ** 2 / cov.shape[0])
        object.__setattr__(self, "_chol", _cholesky(cov))

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @classmethod
    def initial(cls, theta0, adapt_interval: int | None = 1000, **kw) -> "AdaptiveRWState":
        """Diagonal start covariance with sd ``0.1 * |theta0| + 0.01``."""
        sd = 0.1 * np.abs(_values(theta0)) + 0.01
        return cls(np.diag(sd ** 2), adapt_interval=adapt_interval, **kw)

    def should_adapt(self, iteration: int) -> bool:
        return bool(self.adapt_interval) and iteration % self.adapt_interval == 0


def rw_propose(state: AdaptiveRWState, current, rng: RandomSource) -> np.ndarray:
    """Draw ``current + N(0, covariance)``.  The kernel is symmetric."""
    x = _values(current)
    if x.shape[0] != state.dim:
        raise DomainError(f"state has dimension {state.dim}, point has {x.shape[0]}")
    return x + state._chol @ rng.standard_normal(state.dim)


def rw_log_density(state: AdaptiveRWState, frm, to) -> float:
    """Log density (up to a constant) of moving from ``frm`` to ``to``."""
    z = np.linalg.solve(state._chol, _values(to) - _values(frm))
    return -0.5 * float(z @ z)


def rw_adapt(state: AdaptiveRWState, history) -> AdaptiveRWState:
    """Return a new state whose covariance is fitted to ``history``.

    ``history`` holds the chain so far, one row per iteration.
    """
    h = np.asarray(history, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] < 2:
        raise DomainError("adaptation needs at least two points")
    emp = np.atleast_2d(np.cov(h, rowvar=False))
    cov = state.scale * emp + state.jitter * np.eye(state.dim)
    if not np.all(np.isfinite(cov)):
        raise NumericalError("non-finite empirical covariance")
    return replace(state, covariance=cov, running_mean=h.mean(axis=0),
                   sample_count=h.shape[0])


@dataclass(frozen=True)
class IndependenceSamplerSpec:
    """Gaussian independence proposal N(center, covariance)."""

    center: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        center = np.array(_values(self.center), dtype=float).reshape(-1)
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        if cov.shape != (center.size, center.size):
            raise DomainError("covariance shape does not match center")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", _cholesky(cov))


def mis_propose(spec: IndependenceSamplerSpec, rng: RandomSource) -> np.ndarray:
    return spec.center + spec._chol @ rng.standard_normal(spec.center.size)


def mis_log_density(spec: IndependenceSamplerSpec, point) -> float:
    """Unnormalised log density ``-(x - c)' C^-1 (x - c) / 2``."""
    x = _values(point)
    if x.shape != spec.center.shape:
        raise DomainError(f"point has shape {x.shape}, expected {spec.center.shape}")
    z = np.linalg.solve(spec._chol, x - spec.center)
    return -0.5 * float(z @ z)


def regularized_covariance(draws, jitter: float = 1e-10) -> np.ndarray:
    """Sample covariance of draws plus ``jitter * I`` so Cholesky succeeds."""
    d = np.asarray(draws, dtype=float)
    cov = np.atleast_2d(np.cov(d, rowvar=False))
    return cov + jitter * np.eye(cov.shape[0])
