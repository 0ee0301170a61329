"""State-space model with stochastic Gompertz dynamics observed on the log scale.

dX_t = B C exp(-C t) X_t dt + sigma X_t dW_t, with X_0 = A exp(-B) known, has
the explicit solution log X_t = log A - B exp(-C t) - sigma^2 t / 2 + sigma W_t.
Observations are log X_t plus N(0, sigma_eps^2) noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Dataset, DomainError, RandomSource
from .base import Model
from .priors import LogNormal, Prior, Uniform

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GompertzParams:
    logA: float
    logC: float
    logSigma: float
    logSigmaEps: float

    def B(self, x0: float) -> float:
        """B = log(A / X_0)."""
        return self.logA - math.log(x0)


def _check_times(times: np.ndarray):
    if times.ndim != 1 or times.size < 1:
        raise DomainError("times must be a non-empty vector")
    if times[0] != 0.0:
        raise DomainError("times must start at 0")
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")


def _log_path(logA, logC, sigma, log_x0, times, w):
    B = logA - log_x0
    return logA - B * np.exp(-math.exp(logC) * times) - 0.5 * sigma * sigma * times + sigma * w


def _brownian(times: np.ndarray, normals: np.ndarray) -> np.ndarray:
    # normals: (..., n_obs - 1); W_0 = 0
    incr = normals * np.sqrt(np.diff(times))
    w = np.zeros(normals.shape[:-1] + (times.size,))
    np.cumsum(incr, axis=-1, out=w[..., 1:])
    return w


def gompertz_simulate(params: GompertzParams, times, x0: float, rng: RandomSource) -> Dataset:
    """Exact simulation of the log-scale observations at ``times``."""
    times = np.asarray(times, dtype=float)
    _check_times(times)
    if not x0 > 0:
        raise DomainError("x0 must be positive")
    w = _brownian(times, rng.standard_normal(times.size - 1))
    latent = _log_path(params.logA, params.logC, math.exp(params.logSigma), math.log(x0), times, w)
    eps = math.exp(params.logSigmaEps) * rng.standard_normal(times.size)
    return Dataset(times, latent + eps)


class GompertzModel(Model):
    """Gompertz model with ``theta = (log A, log C, log sigma)``.

    ``x0`` and ``sigma_eps`` are known.  Supplied times are rescaled to
    [0, 1] when ``normalize`` is set.
    """

    name = "gompertz"
    param_names = ("logA", "logC", "logSigma")
    log_scale = (True, True, True)

    def __init__(self, times=None, x0: float | None = None, sigma_eps: float = 0.2,
                 normalize: bool = True, prior: Prior | None = None):
        times = np.arange(51.0) if times is None else np.asarray(times, dtype=float)
        times = times - times[0]
        if normalize:
            times = times / times[-1]
        _check_times(times)
        self._times = times
        # default X_0 = A e^{-B} with (log A, log B) = (8.01, 1.609)
        self.x0 = float(x0) if x0 is not None else math.exp(8.01 - math.exp(1.609))
        self.sigma_eps = float(sigma_eps)
        self.prior = prior or Prior([Uniform(1.0, 15.0), Uniform(0.5, 4.0), LogNormal(0.1, 0.2)])

    @property
    def times(self) -> np.ndarray:
        return self._times

    def _latent(self, theta, normals):
        logA, logC, logSigma = (float(v) for v in theta)
        w = _brownian(self._times, normals)
        return _log_path(logA, logC, math.exp(logSigma), math.log(self.x0), self._times, w)

    def simulate_batch(self, theta, rngs):
        n = self._times.size
        draws = np.stack([rng.standard_normal(2 * n - 1) for rng in rngs])
        latent = self._latent(theta, draws[:, : n - 1])
        obs = latent + self.sigma_eps * draws[:, n - 1:]
        return obs[:, :, None]

    def simulate_latent(self, theta, rng):
        # consumes the same leading draws as simulate_batch
        return self._latent(theta, rng.standard_normal(self._times.size - 1))

    def measurement_log_density(self, data, latent, theta) -> float:
        y = np.asarray(data.observations, dtype=float).reshape(-1)
        r = (y - np.asarray(latent, dtype=float).reshape(-1)) / self.sigma_eps
        return float(-0.5 * np.sum(r * r) - y.size * (math.log(self.sigma_eps) + 0.5 * _LOG_2PI))

    def describe(self):
        return {"model": self.name, "n_obs": int(self._times.size), "x0": self.x0,
                "sigma_eps": self.sigma_eps, "params": list(self.param_names)}
