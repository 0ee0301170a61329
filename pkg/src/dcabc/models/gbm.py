"""Two-dimensional correlated geometric Brownian motion with exact likelihood."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..core import Dataset, DcabcError, DomainError, RandomSource
from .base import Model
from .priors import Normal, Prior, TruncatedNormal

logger = logging.getLogger(__name__)

PARAM_NAMES = ("mu1", "logSigma1", "mu2", "logSigma2", "rho")


class OptimizationError(DcabcError, RuntimeError):
    """The optimizer failed; ``best`` holds the best point found, if any."""

    def __init__(self, message, best=None, loglik=None):
        super().__init__(message)
        self.best = best
        self.loglik = loglik


@dataclass(frozen=True)
class Gbm2dParams:
    mu1: float
    logSigma1: float
    mu2: float
    logSigma2: float
    rho: float

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise DomainError(f"|rho| must be < 1, got {self.rho}")

    @classmethod
    def from_array(cls, theta) -> "Gbm2dParams":
        return cls(*(float(v) for v in theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.logSigma1, self.mu2, self.logSigma2, self.rho])

    @property
    def sigma1(self) -> float:
        return math.exp(self.logSigma1)

    @property
    def sigma2(self) -> float:
        return math.exp(self.logSigma2)


def _increments(theta, dt: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Log-increments for normals of shape (..., n, 2)."""
    mu1, ls1, mu2, ls2, rho = (float(v) for v in theta)
    s1, s2 = math.exp(ls1), math.exp(ls2)
    sq = np.sqrt(dt)
    z1 = normals[..., 0]
    z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * normals[..., 1]
    d1 = (mu1 - 0.5 * s1 * s1) * dt + s1 * sq * z1
    d2 = (mu2 - 0.5 * s2 * s2) * dt + s2 * sq * z2
    return np.stack([d1, d2], axis=-1)


def _check_times(times):
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be a strictly increasing vector of length >= 2")


def gbm2d_simulate(params: Gbm2dParams, times, x0, rng: RandomSource) -> Dataset:
    """Exact simulation through independent Brownian increments."""
    times = np.asarray(times, dtype=float)
    _check_times(times)
    x0 = np.asarray(x0, dtype=float).reshape(2)
    if np.any(x0 <= 0):
        raise DomainError("x0 components must be positive")
    normals = rng.standard_normal((times.size - 1, 2))
    logs = np.vstack([np.log(x0), np.log(x0) + np.cumsum(
        _increments(params.as_array(), np.diff(times), normals), axis=0)])
    return Dataset(times, np.exp(logs))


def _log_obs(obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if np.any(~(obs > 0)):
        raise DomainError("GBM observations must be positive")
    return np.log(obs)


def _summaries_from_logs(logs: np.ndarray) -> np.ndarray:
    # logs: (k, n+1, 2)
    d = np.diff(logs, axis=1)
    dx, dy = d[..., 0], d[..., 1]
    return np.column_stack([
        logs[:, -1, 0] - logs[:, 0, 0],
        np.sum(dx * dx, axis=1),
        logs[:, -1, 1] - logs[:, 0, 1],
        np.sum(dy * dy, axis=1),
        np.sum(dx * dy, axis=1),
        np.sum(logs[:, 1:, 0] + logs[:, 1:, 1], axis=1),
    ])


def gbm2d_summaries(data: Dataset) -> np.ndarray:
    """Sufficient statistics (M1, V1, M2, V2, R1, R2) of a discretely observed path.

    M_j telescopes to ln X_n - ln X_0; V_j sums squared log-increments; R1 sums
    cross-products of log-increments; R2 sums ln(X_i Y_i) over i = 1..n.
    """
    obs = np.asarray(data.observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2 or obs.shape[0] < 2:
        raise DomainError("need a two-column dataset with at least two rows")
    return _summaries_from_logs(_log_obs(obs)[None])[0]


def _validated(params, data):
    if isinstance(params, Gbm2dParams):
        theta = params.as_array()
    else:
        theta = np.asarray(params, dtype=float)
    if not abs(theta[4]) < 1:
        raise DomainError("|rho| must be < 1")
    obs = np.asarray(data.observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise DomainError("need a two-column dataset")
    return theta, _log_obs(obs), np.asarray(data.times, dtype=float)


def gbm2d_exact_loglik(params, data: Dataset) -> float:
    """Exact log-likelihood: sum of log bivariate log-normal transition densities."""
    theta, logs, times = _validated(params, data)
    mu1, ls1, mu2, ls2, rho = theta
    s1, s2 = math.exp(ls1), math.exp(ls2)
    dt = np.diff(times)
    one_m = 1.0 - rho * rho
    e1 = np.diff(logs[:, 0]) - (mu1 - 0.5 * s1 * s1) * dt
    e2 = np.diff(logs[:, 1]) - (mu2 - 0.5 * s2 * s2) * dt
    quad = (e1 * e1 / (s1 * s1) + e2 * e2 / (s2 * s2)
            - 2.0 * rho * e1 * e2 / (s1 * s2)) / (2.0 * dt * one_m)
    log_norm = (np.log(2.0 * math.pi * dt) + 0.5 * math.log(one_m) + ls1 + ls2
                + logs[1:, 0] + logs[1:, 1])
    return float(-np.sum(log_norm + quad))


def gbm1d_transition_loglik(mu: float, log_sigma: float, times, x) -> float:
    """Exact log-likelihood of a single GBM path (log-normal transitions)."""
    times = np.asarray(times, dtype=float)
    lx = np.log(np.asarray(x, dtype=float))
    s = math.exp(log_sigma)
    dt = np.diff(times)
    e = np.diff(lx) - (mu - 0.5 * s * s) * dt
    return float(np.sum(-0.5 * np.log(2.0 * math.pi * dt) - log_sigma - lx[1:]
                        - e * e / (2.0 * s * s * dt)))


@dataclass(frozen=True)
class _SufficientStats:
    n: int
    total_time: float
    s1: np.ndarray          # sum of log-increments
    s2: np.ndarray          # sum of outer(d, d) / dt
    const: float            # sum of log(2 pi dt) + log x_i + log y_i

    @classmethod
    def from_data(cls, data: Dataset) -> "_SufficientStats":
        logs = _log_obs(np.asarray(data.observations, dtype=float))
        times = np.asarray(data.times, dtype=float)
        dt = np.diff(times)
        d = np.diff(logs, axis=0)
        return cls(n=dt.size, total_time=float(dt.sum()), s1=d.sum(axis=0),
                   s2=(d / dt[:, None]).T @ d,
                   const=float(np.sum(np.log(2.0 * math.pi * dt)) + logs[1:].sum()))

    def loglik(self, theta) -> float:
        mu1, ls1, mu2, ls2, rho = (float(v) for v in theta)
        if not abs(rho) < 1:
            return -math.inf
        v1, v2 = math.exp(2.0 * ls1), math.exp(2.0 * ls2)
        a1, a2 = mu1 - 0.5 * v1, mu2 - 0.5 * v2
        (q11, q12), (_, q22) = self.s2
        b1, b2 = self.s1
        t = self.total_time
        # scatter of the increments about their means, divided by dt
        c11 = q11 - 2.0 * a1 * b1 + t * a1 * a1
        c22 = q22 - 2.0 * a2 * b2 + t * a2 * a2
        c12 = q12 - a1 * b2 - a2 * b1 + t * a1 * a2
        one_m = 1.0 - rho * rho
        trace = (c11 / v1 + c22 / v2 - 2.0 * rho * c12 / math.sqrt(v1 * v2)) / one_m
        logdet = 2.0 * (ls1 + ls2) + math.log(one_m)
        return -self.const - 0.5 * self.n * logdet - 0.5 * trace


def gbm2d_closed_form_mle(data: Dataset) -> np.ndarray:
    """MLE from the moments of log-increments, which are independent Gaussians.

    With increments d_i ~ N(a dt_i, Sigma dt_i), the drift estimate is
    sum(d_i) / sum(dt_i) and Sigma is the dt-weighted residual covariance.
    Raises :class:`OptimizationError` when Sigma is singular.
    """
    logs = _log_obs(np.asarray(data.observations, dtype=float))
    dt = np.diff(np.asarray(data.times, dtype=float))
    d = np.diff(logs, axis=0)
    a = d.sum(axis=0) / dt.sum()
    resid = d - np.outer(dt, a)
    cov = (resid / dt[:, None]).T @ resid / dt.size
    v1, v2 = cov[0, 0], cov[1, 1]
    if not (v1 > 0 and v2 > 0) or v1 * v2 - cov[0, 1] ** 2 <= 1e-14 * v1 * v2:
        raise OptimizationError("log-increment covariance is singular; parameters "
                                "are not identifiable from these data")
    rho = cov[0, 1] / math.sqrt(v1 * v2)
    return np.array([a[0] + 0.5 * v1, 0.5 * math.log(v1), a[1] + 0.5 * v2,
                     0.5 * math.log(v2), rho])


def gbm2d_exact_mle(data: Dataset, n_restarts: int = 5, jitter: float = 0.05,
                    rng: RandomSource | None = None, xatol: float = 1e-10,
                    fatol: float = 1e-12, n_polish: int = 3) -> tuple[Gbm2dParams, float]:
    """Maximise the exact likelihood with Nelder-Mead.

    The closed-form moment MLE is the primary start; ``n_restarts`` further
    runs start from it jittered by N(0, jitter^2).  A run that stops short of
    the tolerances is restarted from where it ended up to ``n_polish`` times;
    the best converged optimum wins.
    """
    if data.n_obs < 3:
        raise OptimizationError("need at least three observations")
    start = gbm2d_closed_form_mle(data)
    stats = _SufficientStats.from_data(data)
    rng = rng or RandomSource(0, (0xB0B,))

    # measured from the start value so fatol stays above rounding error
    offset = stats.loglik(start)

    def objective(x):
        # rho travels through atanh so the simplex never leaves (-1, 1)
        theta = np.array([x[0], x[1], x[2], x[3], math.tanh(x[4])])
        val = stats.loglik(theta) - offset
        return -val if math.isfinite(val) else 1e300

    z0 = start.copy()
    z0[4] = math.atanh(start[4])
    starts = [z0] + [z0 + jitter * rng.child(i).standard_normal(5) for i in range(n_restarts)]
    options = {"xatol": xatol, "fatol": fatol, "maxiter": 20000, "maxfev": 40000,
               "adaptive": True}
    results = []
    for z in starts:
        res = minimize(objective, z, method="Nelder-Mead", options=options)
        # a collapsed simplex stalls on strongly correlated data; restart it in place
        for _ in range(n_polish):
            if res.success:
                break
            res = minimize(objective, res.x, method="Nelder-Mead", options=options)
        results.append(res)
    converged = [r for r in results if r.success]
    best = min(converged or results, key=lambda r: r.fun)
    theta = best.x.copy()
    theta[4] = math.tanh(theta[4])
    loglik = offset - best.fun
    if not best.success or not math.isfinite(loglik):
        raise OptimizationError(f"Nelder-Mead did not converge: {best.message}",
                                best=theta, loglik=loglik)
    return Gbm2dParams.from_array(theta), float(gbm2d_exact_loglik(theta, data))


class Gbm2dModel(Model):
    """2-D GBM with ``theta = (mu1, log sigma1, mu2, log sigma2, rho)``."""

    name = "gbm2d"
    param_names = PARAM_NAMES
    log_scale = (False, True, False, True, False)
    n_summaries = 6

    def __init__(self, times=None, x0=(1.0, 2.0), prior: Prior | None = None):
        self._times = np.linspace(0.0, 1.0, 501) if times is None else np.asarray(times, float)
        _check_times(self._times)
        self.x0 = np.asarray(x0, dtype=float).reshape(2)
        self._dt = np.diff(self._times)
        self.prior = prior or Prior([
            Normal(1.5, 0.5), Normal(-1.0, 0.5), Normal(1.5, 0.5), Normal(-1.0, 0.5),
            TruncatedNormal(0.5, 0.3, -1.0, 1.0)])

    @property
    def times(self) -> np.ndarray:
        return self._times

    def _log_paths(self, theta, rngs):
        n = self._dt.size
        normals = np.stack([rng.standard_normal((n, 2)) for rng in rngs])
        incr = _increments(theta, self._dt, normals)
        logs = np.empty((len(rngs), n + 1, 2))
        logs[:, 0, :] = np.log(self.x0)
        np.cumsum(incr, axis=1, out=logs[:, 1:, :])
        logs[:, 1:, :] += np.log(self.x0)
        return logs

    def simulate_batch(self, theta, rngs):
        return np.exp(self._log_paths(theta, rngs))

    def summaries_batch(self, obs):
        return _summaries_from_logs(_log_obs(obs))

    def simulate_summaries(self, theta, rngs):
        # skips the exp/log round trip
        return _summaries_from_logs(self._log_paths(theta, rngs))

    def describe(self):
        return {"model": self.name, "n_obs": int(self._times.size),
                "x0": self.x0.tolist(), "params": list(self.param_names)}
