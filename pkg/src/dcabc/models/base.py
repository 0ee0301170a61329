"""The contract every simulator model satisfies."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import Dataset, ParameterVector, RandomSource
from .priors import Prior


class Model:
    """A parametric data-generating model on the inference scale.

    Subclasses set ``name``, ``param_names``, ``log_scale`` and ``prior`` and
    implement :meth:`simulate_batch`.  Each entry of ``rngs`` drives exactly
    one simulated dataset, so a batch can be split across threads without
    changing any draw.
    """

    name = "model"
    param_names: tuple[str, ...] = ()
    log_scale: tuple[bool, ...] = ()
    prior: Prior

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def times(self) -> np.ndarray:
        raise NotImplementedError

    def parameter_vector(self, values) -> ParameterVector:
        return ParameterVector(values, self.param_names, self.log_scale)

    def simulate_batch(self, theta: np.ndarray, rngs: Sequence[RandomSource]) -> np.ndarray:
        """Observation matrices for ``len(rngs)`` datasets, shape ``(k, n_obs, d_y)``."""
        raise NotImplementedError

    def simulate(self, theta, rng: RandomSource) -> Dataset:
        theta = getattr(theta, "values", theta)
        obs = self.simulate_batch(np.asarray(theta, dtype=float), [rng])[0]
        return Dataset(self.times, obs)

    # builtin summaries; models without them rely on a SummaryProjection
    n_summaries: int | None = None

    def summaries_batch(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no builtin summaries")

    def summaries(self, data: Dataset) -> np.ndarray:
        return self.summaries_batch(np.asarray(data.observations)[None])[0]

    def simulate_summaries(self, theta: np.ndarray, rngs: Sequence[RandomSource]) -> np.ndarray:
        """Builtin summaries of ``len(rngs)`` fresh datasets, shape ``(k, d_s)``."""
        return self.summaries_batch(self.simulate_batch(theta, rngs))

    # tractable measurement models (used by plain data-cloning MCMC)
    def simulate_latent(self, theta: np.ndarray, rng: RandomSource) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no latent process")

    def measurement_log_density(self, data: Dataset, latent: np.ndarray,
                                theta: np.ndarray) -> float:
        raise NotImplementedError(f"{self.name} has no tractable measurement density")

    @property
    def has_measurement_density(self) -> bool:
        return type(self).measurement_log_density is not Model.measurement_log_density

    def describe(self) -> dict:
        return {"model": self.name, "params": list(self.param_names)}
