"""Independent per-coordinate priors on the inference scale."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from ..core import DomainError, RandomSource

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise DomainError("uniform prior needs high > low")

    def log_density(self, x: float) -> float:
        if self.low <= x <= self.high:
            return -math.log(self.high - self.low)
        return -math.inf

    def sample(self, rng: RandomSource) -> float:
        return float(rng.uniform(self.low, self.high))

    def to_json(self):
        return {"dist": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def log_density(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - _LOG_SQRT_2PI

    def sample(self, rng: RandomSource) -> float:
        return float(self.mean + self.sd * rng.standard_normal())

    def to_json(self):
        return {"dist": "normal", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class LogNormal(Normal):
    """LN(mean, sd) on a positive parameter, expressed on its log.

    The sampler works with ``log x``, whose density is N(mean, sd^2); the
    class exists so configs can name the distribution the way it is usually
    quoted.
    """

    def to_json(self):
        return {"dist": "lognormal", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    sd: float
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise DomainError("truncation interval is empty")

    @property
    def _mass(self) -> float:
        return float(ndtr((self.high - self.mean) / self.sd)
                     - ndtr((self.low - self.mean) / self.sd))

    def log_density(self, x: float) -> float:
        if not (self.low < x < self.high):
            return -math.inf
        z = (x - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - _LOG_SQRT_2PI - math.log(self._mass)

    def sample(self, rng: RandomSource) -> float:
        # inverse CDF restricted to the truncation interval
        a = ndtr((self.low - self.mean) / self.sd)
        b = ndtr((self.high - self.mean) / self.sd)
        u = rng.uniform(a, b)
        return float(self.mean + self.sd * ndtri(u))

    def to_json(self):
        return {"dist": "truncnormal", "mean": self.mean, "sd": self.sd,
                "low": self.low, "high": self.high}


_DISTS = {"uniform": Uniform, "normal": Normal, "lognormal": LogNormal,
          "truncnormal": TruncatedNormal}


def component_from_json(doc: dict):
    doc = dict(doc)
    kind = doc.pop("dist")
    try:
        return _DISTS[kind](**doc)
    except KeyError:
        raise DomainError(f"unknown prior distribution {kind!r}") from None


class Prior:
    """Product of independent one-dimensional priors."""

    def __init__(self, components: Sequence):
        self.components = tuple(components)

    def __len__(self):
        return len(self.components)

    def log_density(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        total = 0.0
        for comp, x in zip(self.components, theta):
            lp = comp.log_density(float(x))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def sample(self, rng: RandomSource) -> np.ndarray:
        return np.array([c.sample(rng.child(i)) for i, c in enumerate(self.components)])

    def sample_many(self, n: int, rng: RandomSource) -> np.ndarray:
        return np.array([self.sample(rng.child(j)) for j in range(n)])

    def to_json(self):
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, docs) -> "Prior":
        return cls([component_from_json(d) for d in docs])
