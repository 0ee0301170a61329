"""The g-and-k distribution: defined through its quantile function only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Dataset, DegenerateStatisticError, DomainError, RandomSource
from .base import Model
from .priors import Prior, Uniform

PERCENTILES = (20.0, 40.0, 60.0, 80.0)


@dataclass(frozen=True)
class GandKParams:
    A: float
    B: float
    g: float
    k: float
    c: float = 0.8

    def __post_init__(self):
        if not self.B > 0:
            raise DomainError(f"B must be positive, got {self.B}")
        if not self.k > -0.5:
            raise DomainError(f"k must exceed -0.5, got {self.k}")


def _quantile(A, B, g, k, c, r):
    # (1 - e^{-gr}) / (1 + e^{-gr}) == tanh(gr / 2)
    return A + B * (1.0 + c * np.tanh(0.5 * g * r)) * np.exp(k * np.log1p(r * r)) * r


def gandk_quantile(params: GandKParams, r):
    """Quantile function evaluated at standard normal quantile(s) ``r``."""
    return _quantile(params.A, params.B, params.g, params.k, params.c, np.asarray(r, float))


def gandk_simulate(params: GandKParams, n: int, rng: RandomSource) -> Dataset:
    if n < 1:
        raise DomainError("n must be at least 1")
    z = gandk_quantile(params, rng.standard_normal(n))
    return Dataset(np.arange(1, n + 1, dtype=float), z)


def skewness(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Moment-ratio skewness m3 / m2^1.5 with 1/n moments; NaN at zero variance."""
    x = np.asarray(x, dtype=float)
    dev = x - x.mean(axis=axis, keepdims=True)
    m2 = np.mean(dev * dev, axis=axis)
    m3 = np.mean(dev * dev * dev, axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m2 > 0, m3 / m2 ** 1.5, np.nan)


def sorted_percentiles(sorted_rows: np.ndarray, percents=PERCENTILES) -> np.ndarray:
    """Linear-interpolation percentiles of already sorted rows, shape (k, len(percents))."""
    n = sorted_rows.shape[-1]
    pos = np.asarray(percents, dtype=float) / 100.0 * (n - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    a = sorted_rows[..., lo]
    b = sorted_rows[..., hi]
    return a + (b - a) * frac


def _summaries_2d(z: np.ndarray) -> np.ndarray:
    # z: (k, n); a full sort beats multi-pivot partitioning at these sizes
    q = sorted_percentiles(np.sort(z, axis=1))
    return np.column_stack([q, skewness(z, axis=1)])


def gandk_summaries(data: Dataset) -> np.ndarray:
    """(P20, P40, P60, P80, skewness) of a scalar dataset.

    Percentiles interpolate linearly between order statistics: for sorted
    data ``x_(0..n-1)`` the p-th percentile sits at position ``p/100 * (n-1)``.
    """
    z = np.asarray(data.observations, dtype=float).reshape(-1)
    if z.size < 3:
        raise DomainError("need at least three observations")
    out = _summaries_2d(z[None, :])[0]
    if not np.isfinite(out[-1]):
        raise DegenerateStatisticError("data have zero variance; skewness undefined")
    return out


class GandKModel(Model):
    """g-and-k with ``theta = (A, B, g, k)`` and c held fixed."""

    name = "gandk"
    param_names = ("A", "B", "g", "k")
    log_scale = (False, False, False, False)
    n_summaries = 5

    def __init__(self, n: int = 10_000, c: float = 0.8, prior: Prior | None = None):
        self.n = int(n)
        self.c = float(c)
        self.prior = prior or Prior([Uniform(0.0, 10.0)] * 4)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n + 1, dtype=float)

    def simulate_batch(self, theta, rngs):
        A, B, g, k = (float(v) for v in theta)
        r = np.stack([rng.standard_normal(self.n) for rng in rngs])
        return _quantile(A, B, g, k, self.c, r)[:, :, None]

    def summaries_batch(self, obs):
        obs = np.asarray(obs, dtype=float)
        return _summaries_2d(obs.reshape(obs.shape[0], -1))

    def describe(self):
        return {"model": self.name, "n": self.n, "c": self.c,
                "params": list(self.param_names)}
