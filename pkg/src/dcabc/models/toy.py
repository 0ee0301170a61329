"""A one-parameter toy model whose ABC posterior can be enumerated exactly.

theta is uniform on [0, n_levels); only its integer part matters, selecting a
success probability (b + 0.5) / n_levels for a Binomial(n_trials, p) count.
The summary is the count itself.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import binom

from ..core import Dataset
from .base import Model
from .priors import Prior, Uniform


class DiscreteToyModel(Model):
    name = "toy"
    param_names = ("theta",)
    log_scale = (False,)
    n_summaries = 1

    def __init__(self, n_levels: int = 15, n_trials: int = 12):
        self.n_levels = int(n_levels)
        self.n_trials = int(n_trials)
        self.prior = Prior([Uniform(0.0, float(n_levels))])

    @property
    def times(self):
        return np.array([0.0])

    def level(self, theta) -> int:
        return int(min(max(np.floor(theta[0]), 0), self.n_levels - 1))

    def probability(self, level: int) -> float:
        return (level + 0.5) / self.n_levels

    def simulate_batch(self, theta, rngs):
        p = self.probability(self.level(theta))
        counts = np.array([rng.generator.binomial(self.n_trials, p) for rng in rngs], dtype=float)
        return counts.reshape(-1, 1, 1)

    def summaries_batch(self, obs):
        return np.asarray(obs, dtype=float).reshape(-1, 1)

    def observed(self, count: int) -> Dataset:
        return Dataset(self.times, [[float(count)]])


def enumerated_abc_posterior(model: DiscreteToyModel, observed_count: int,
                             delta: float, clones: int = 1, omega2: float = 1.0) -> np.ndarray:
    """Exact marginal of the powered ABC posterior over the parameter levels.

    For each level b the single-clone ABC likelihood is
    ``sum_z J_delta(y, z) P(z | b)`` with a Gaussian kernel; the K-clone target
    raises it to the power K.  The uniform prior puts equal mass on each level.
    """
    z = np.arange(model.n_trials + 1)
    log_j = -(z - observed_count) ** 2 / (2.0 * delta * delta * omega2)
    probs = np.array([binom.pmf(z, model.n_trials, model.probability(b))
                      for b in range(model.n_levels)])
    log_like = np.log(probs @ np.exp(log_j))
    log_post = clones * log_like
    log_post -= log_post.max()
    post = np.exp(log_post)
    return post / post.sum()
