"""MCMC drivers: ABC-MCMC, static and dynamic ABC with data cloning, and plain data-cloning MCMC.

All four share one Metropolis-Hastings engine.  Every iteration ``j`` reads
its proposal and acceptance draws from stream ``(0, j)`` and simulates clone
``k`` from stream ``(1, j, k)``; the q* re-evaluation performed when K grows
uses ``(2, j, k)``.  Results therefore do not depend on how clone
simulations are spread across threads.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    ChainTrace,
    CloneSchedule,
    ConfigError,
    Dataset,
    DcabcError,
    DeltaSchedule,
    DomainError,
    ParameterVector,
    RandomSource,
    as_random_source,
)
from .inference import AdjustmentResult, regression_adjust
from .kernels import (
    KernelKind,
    KernelSpec,
    SummaryProjection,
    WeightMatrix,
    log_kernels_from_sq,
    weighted_sq_distance,
)
from .models.base import Model
from .proposals import (
    AdaptiveRWState,
    IndependenceSamplerSpec,
    mis_log_density,
    mis_propose,
    regularized_covariance,
    rw_adapt,
    rw_log_density,
    rw_propose,
)

logger = logging.getLogger(__name__)

STREAM_STEP, STREAM_CLONE, STREAM_REBALANCE, STREAM_INIT = 0, 1, 2, 3


class StagnationError(DcabcError, RuntimeError):
    """The final regime of a run accepted no proposals."""


# -- configuration and results ----------------------------------------------

@dataclass(frozen=True)
class AbcDcConfig:
    """Schedules and run settings for dynamic ABC with data cloning."""

    delta_schedule: DeltaSchedule
    clone_schedule: CloneSchedule
    total_iterations: int
    burnin_fraction: float = 0.1
    adapt_interval: int | None = 1000
    use_regression_adjustment: bool = False
    center_rule: str = "mean"
    master_seed: int = 0
    stagnation_window: int = 5000

    def __post_init__(self):
        if self.total_iterations < 1:
            raise ConfigError("total_iterations must be at least 1")
        if not 0.0 <= self.burnin_fraction < 1.0:
            raise ConfigError("burnin_fraction must lie in [0, 1)")
        start = self.clone_schedule.cloning_start
        if start is not None and start < self.delta_schedule.final_start:
            raise ConfigError(
                "delta must reach its final value before cloning starts "
                f"(final delta at {self.delta_schedule.final_start}, K>1 at {start})")
        if self.center_rule not in ("mean", "mode"):
            raise ConfigError("center_rule must be 'mean' or 'mode'")

    def to_json(self) -> dict:
        return {
            "delta_schedule": [list(b) for b in self.delta_schedule.breakpoints],
            "clone_schedule": [list(b) for b in self.clone_schedule.breakpoints],
            "total_iterations": self.total_iterations,
            "burnin_fraction": self.burnin_fraction,
            "adapt_interval": self.adapt_interval,
            "use_regression_adjustment": self.use_regression_adjustment,
            "center_rule": self.center_rule,
            "master_seed": self.master_seed,
            "stagnation_window": self.stagnation_window,
        }


@dataclass
class ModeTracker:
    """Running maximum of log q# + log prior over candidate proposals."""

    best_log_posterior_kernel: float = -math.inf
    best_theta: np.ndarray | None = None
    updates: int = 0

    def update(self, value: float, theta) -> bool:
        self.updates += 1
        if value > self.best_log_posterior_kernel:
            self.best_log_posterior_kernel = float(value)
            self.best_theta = np.array(theta, dtype=float)
            return True
        return False

    def to_json(self) -> dict:
        return {
            "best_log_posterior_kernel": _json_float(self.best_log_posterior_kernel),
            "best_theta": None if self.best_theta is None else self.best_theta.tolist(),
            "candidates_seen": self.updates,
        }


@dataclass
class DcResult:
    trace: ChainTrace
    final_slice_mean: ParameterVector
    final_slice_covariance: np.ndarray
    asymptotic_mle_covariance: np.ndarray
    acceptance_rates: list[dict]
    final_clones: int
    burnin_fraction: float
    mode_tracker: ModeTracker | None = None
    adjustment: AdjustmentResult | None = None
    s_obs: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def theta_hat(self) -> np.ndarray:
        return np.asarray(self.final_slice_mean.values)

    def slice_draws(self, regime_index: int = -1) -> np.ndarray:
        r = self.trace.regimes[regime_index]
        return self.trace.theta[self.trace.regime_slice(r, self.burnin_fraction)]

    def draws_by_clones(self) -> dict[int, np.ndarray]:
        """Post-burnin draws of the last regime run at each K."""
        out = {}
        for r in self.trace.regimes:
            out[r.clones] = self.trace.theta[self.trace.regime_slice(r, self.burnin_fraction)]
        return out

    def to_json(self) -> dict:
        return {
            "param_names": list(self.trace.param_names),
            "theta_hat": self.theta_hat.tolist(),
            "covariance": _json_matrix(self.final_slice_covariance),
            "asymptotic_covariance": _json_matrix(self.asymptotic_mle_covariance),
            "asymptotic_se": [_json_float(v) for v in
                              np.sqrt(np.clip(np.diag(self.asymptotic_mle_covariance), 0, None))],
            "final_K": self.final_clones,
            "burnin_fraction": self.burnin_fraction,
            "acceptance_rates": self.acceptance_rates,
            "mode_tracker": None if self.mode_tracker is None else self.mode_tracker.to_json(),
            "regression_adjustment": None if self.adjustment is None else {
                "center": self.adjustment.center.tolist(),
                "beta_hat": _json_matrix(self.adjustment.beta_hat),
                "alpha_hat": self.adjustment.alpha_hat.tolist(),
            },
            "s_obs": None if self.s_obs is None else self.s_obs.tolist(),
            "warnings": list(self.warnings),
        }


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _json_matrix(m):
    return [[_json_float(v) for v in row] for row in np.atleast_2d(m)]


# -- clone simulation --------------------------------------------------------

class CloneSimulator:
    """Simulates summaries for a batch of clones, optionally on several threads.

    Each clone owns its random stream and summaries are computed row by row,
    so the output is identical for any thread count.
    """

    def __init__(self, model: Model, summaries: SummaryProjection | None = None,
                 threads: int = 1):
        self.model = model
        self.summaries = summaries
        self.threads = max(1, int(threads))
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    @property
    def d_s(self) -> int:
        if self.summaries is not None:
            return self.summaries.dim
        if self.model.n_summaries is None:
            raise ConfigError(f"model {self.model.name} needs a summary projection")
        return self.model.n_summaries

    def _chunk(self, theta, rngs):
        if self.summaries is None:
            return self.model.simulate_summaries(theta, rngs)
        return self.summaries.batch(self.model.simulate_batch(theta, rngs))

    def __call__(self, theta: np.ndarray, rngs: Sequence[RandomSource]) -> np.ndarray:
        if self._pool is None or len(rngs) < 2:
            return self._chunk(theta, rngs)
        n = min(self.threads, len(rngs))
        bounds = np.linspace(0, len(rngs), n + 1).astype(int)
        parts = self._pool.map(lambda ab: self._chunk(theta, rngs[ab[0]:ab[1]]),
                               zip(bounds[:-1], bounds[1:]))
        return np.vstack(list(parts))

    def observed(self, data: Dataset) -> np.ndarray:
        if self.summaries is None:
            return np.asarray(self.model.summaries(data), dtype=float)
        return self.summaries(data)

    def map(self, fn: Callable, items: Sequence):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


# -- the engine --------------------------------------------------------------

def _log_ratio(num: float, den: float) -> float:
    """num - den in log space with -inf handled (never NaN)."""
    if num == -math.inf:
        return -math.inf
    if den == -math.inf:
        return math.inf
    return num - den


def acceptance_probability(log_q_new: float, log_q_cur: float, log_prior_new: float,
                           log_prior_cur: float, log_proposal_ratio: float = 0.0) -> float:
    """min(1, q#/q* * u(theta*|theta#)/u(theta#|theta*) * pi(theta#)/pi(theta*))."""
    terms = (_log_ratio(log_q_new, log_q_cur), _log_ratio(log_prior_new, log_prior_cur),
             log_proposal_ratio)
    if -math.inf in terms:
        return 0.0
    if math.inf in terms:
        return 1.0
    la = math.fsum(terms)
    return 1.0 if la >= 0 else math.exp(la)


def _breakpoint_array(breakpoints, n, dtype):
    out = np.empty(n, dtype=dtype)
    bps = list(breakpoints)
    for i, (start, value) in enumerate(bps):
        stop = bps[i + 1][0] - 1 if i + 1 < len(bps) else n
        out[max(start, 1) - 1:stop] = value
    return out


@dataclass
class _Plan:
    deltas: np.ndarray
    clones: np.ndarray
    dynamic: bool = False
    track_from: int | None = None   # first iteration of mode tracking
    cloning_start: int | None = None


class _Chain:
    def __init__(self, model: Model, sim: CloneSimulator, s_obs: np.ndarray,
                 kind: KernelKind, weights: WeightMatrix, plan: _Plan,
                 theta0: np.ndarray, rw: AdaptiveRWState, rng: RandomSource,
                 burnin_fraction: float, stagnation_window: int,
                 regression: bool = False, center_rule: str = "mean",
                 explicit_proposal_ratio: bool = False):
        self.model = model
        self.sim = sim
        self.s_obs = s_obs
        self.kind = KernelKind(kind)
        self.weights = weights
        self.plan = plan
        self.theta0 = theta0
        self.rw = rw
        self.rng = rng
        self.burnin_fraction = burnin_fraction
        self.window = stagnation_window
        self.regression = regression
        self.center_rule = center_rule
        self.explicit_ratio = explicit_proposal_ratio
        self.tracker = ModeTracker() if plan.dynamic else None
        self.adjustment = None
        self.warnings: list[str] = []

    def _log_q(self, sims: np.ndarray, delta: float) -> float:
        sq = weighted_sq_distance(self.weights, self.s_obs, sims)
        return float(np.sum(log_kernels_from_sq(self.kind, delta, sq)))

    def _simulate(self, theta, tag, j, K):
        return self.sim(theta, [self.rng.child(tag, j, k) for k in range(K)])

    def _slice(self, trace, start, end):
        length = end - start + 1
        skip = int(math.floor(self.burnin_fraction * length))
        return slice(start - 1 + skip, end)

    def _enter_cloning(self, trace, j):
        """Build the independence proposal when K first exceeds 1."""
        final_start = int(np.flatnonzero(self.plan.deltas == self.plan.deltas[j - 2])[0]) + 1
        sl = self._slice(trace, final_start, j - 1)
        draws = trace.theta[sl]
        if self.regression:
            spec = KernelSpec(KernelKind.GAUSSIAN, float(self.plan.deltas[j - 2]), self.weights)
            adj = regression_adjust(draws, trace.summaries[sl], self.s_obs, spec,
                                    center_rule=self.center_rule)
            self.adjustment = adj
            center, cov = adj.center, adj.covariance + 1e-10 * np.eye(draws.shape[1])
        else:
            if self.tracker.best_theta is None:
                raise ConfigError("no proposal was evaluated at the final threshold, so "
                                  "the mode estimate is undefined; lengthen the K=1 stage")
            center = self.tracker.best_theta
            cov = self._covariance_or_fallback(draws)
        return IndependenceSamplerSpec(center, cov)

    def _covariance_or_fallback(self, draws):
        if draws.shape[0] >= 2:
            cov = regularized_covariance(draws)
            if np.all(np.diag(cov) > 1e-9):
                return cov
        self.warnings.append("too few distinct draws for a sample covariance; "
                             "reusing the random-walk covariance")
        return np.array(self.rw.covariance)

    def run(self) -> tuple[ChainTrace, IndependenceSamplerSpec | None]:
        plan = self.plan
        R = plan.deltas.size
        d = self.theta0.size
        trace = ChainTrace.allocate(R, self.model.param_names, self.sim.d_s)
        prior = self.model.prior

        theta = self.theta0.copy()
        lp = prior.log_density(theta)
        if lp == -math.inf:
            raise ConfigError(f"initial parameter {theta} lies outside the prior support")
        K = int(plan.clones[0])
        delta = float(plan.deltas[0])
        sims = self._simulate(theta, STREAM_CLONE, 0, K)
        log_q = self._log_q(sims, delta)
        q_clones = K
        mis: IndependenceSamplerSpec | None = None
        mis_cur = 0.0
        regime_start, regime_acc, run_rej, warned = 1, 0, 0, False

        for j in range(1, R + 1):
            new_delta = float(plan.deltas[j - 1])
            new_K = int(plan.clones[j - 1])
            if new_delta != delta or new_K != K:
                regime_start, regime_acc, run_rej, warned = j, 0, 0, False
            if new_delta != delta:
                # same simulated clones, new threshold: re-evaluate the kernel exactly
                delta = new_delta
                log_q = self._log_q(sims, delta)
            if new_K != K:
                if plan.dynamic:
                    if mis is None:
                        mis = self._enter_cloning(trace, j)
                    else:
                        start = int(np.flatnonzero(plan.clones == K)[0]) + 1
                        mis = IndependenceSamplerSpec(
                            mis.center, self._covariance_or_fallback(
                                trace.theta[self._slice(trace, start, j - 1)]))
                    mis_cur = mis_log_density(mis, theta)
                K = new_K
                sims = self._simulate(theta, STREAM_REBALANCE, j, K)
                log_q = self._log_q(sims, delta)
                q_clones = K

            step = self.rng.child(STREAM_STEP, j)
            if mis is not None:
                prop = mis_propose(mis, step)
                mis_prop = mis_log_density(mis, prop)
                log_u = mis_cur - mis_prop
            else:
                prop = rw_propose(self.rw, theta, step)
                log_u = (rw_log_density(self.rw, prop, theta) - rw_log_density(self.rw, theta, prop)
                         if self.explicit_ratio else 0.0)
            u = step.uniform()
            lp_prop = prior.log_density(prop)
            accepted = False
            if lp_prop != -math.inf:
                prop_sims = self._simulate(prop, STREAM_CLONE, j, K)
                log_q_prop = self._log_q(prop_sims, delta)
                if self.tracker is not None and K == 1 and j >= plan.track_from:
                    self.tracker.update(log_q_prop + lp_prop, prop)
                alpha = acceptance_probability(log_q_prop, log_q, lp_prop, lp, log_u)
                if u < alpha:
                    accepted = True
                    theta, lp, log_q, sims = prop, lp_prop, log_q_prop, prop_sims
                    q_clones = K
                    if mis is not None:
                        mis_cur = mis_prop

            trace.delta[j - 1] = delta
            trace.clones[j - 1] = K
            trace.theta[j - 1] = theta
            trace.log_kernel[j - 1] = log_q
            trace.accepted[j - 1] = accepted
            trace.qstar_clones[j - 1] = q_clones
            trace.summaries[j - 1] = sims[0]

            if accepted:
                regime_acc += 1
                run_rej = 0
            else:
                run_rej += 1
            if self.window and run_rej >= self.window and not warned:
                warned = True
                msg = (f"no acceptances in {run_rej} consecutive iterations "
                       f"(iteration {j}, delta={delta}, K={K})")
                final_regime = plan.dynamic and K > 1 and K == int(plan.clones[-1])
                if final_regime and regime_acc == 0:
                    raise StagnationError(msg + "; try a smaller jump in K or a larger delta")
                logger.warning(msg)
                self.warnings.append(msg)

            if mis is None and self.rw.should_adapt(j):
                self.rw = rw_adapt(self.rw, trace.theta[:j])

        if plan.dynamic and K > 1 and regime_acc == 0:
            raise StagnationError(
                f"final regime (delta={delta}, K={K}) accepted no proposals; "
                "try a smaller jump in K or a larger delta")
        return trace.finalize(), mis


def _summarize(chain: _Chain, trace: ChainTrace, burnin_fraction: float,
               started: float) -> DcResult:
    final = trace.final_regime
    draws = trace.theta[trace.regime_slice(final, burnin_fraction)]
    mean = draws.mean(axis=0)
    if draws.shape[0] >= 2:
        cov = np.atleast_2d(np.cov(draws, rowvar=False))
    else:
        cov = np.full((draws.shape[1], draws.shape[1]), np.nan)
    K = int(final.clones) if final.clones > 0 else 1
    return DcResult(
        trace=trace,
        final_slice_mean=chain.model.parameter_vector(mean),
        final_slice_covariance=cov,
        asymptotic_mle_covariance=K * cov,
        acceptance_rates=trace.acceptance_rates(),
        final_clones=K,
        burnin_fraction=burnin_fraction,
        mode_tracker=chain.tracker,
        adjustment=chain.adjustment,
        s_obs=chain.s_obs,
        warnings=chain.warnings,
        wall_seconds=time.perf_counter() - started,
    )


def _initial_theta(model: Model, theta0, rng: RandomSource) -> np.ndarray:
    if theta0 is None:
        return model.prior.sample(rng.child(STREAM_INIT))
    theta0 = np.asarray(getattr(theta0, "values", theta0), dtype=float)
    if theta0.size != model.dim:
        raise DomainError(f"theta0 has {theta0.size} entries, model has {model.dim}")
    return theta0


def _prepare(model, data, summaries, weights, threads, rng):
    sim = CloneSimulator(model, summaries, threads)
    s_obs = sim.observed(data)
    if weights is None:
        weights = WeightMatrix.unit(s_obs.size)
    elif not isinstance(weights, WeightMatrix):
        weights = WeightMatrix(weights)
    if len(weights) != s_obs.size:
        raise DomainError(f"{len(weights)} weights for {s_obs.size} summaries")
    return sim, s_obs, weights, as_random_source(rng)


def _run(model, data, summaries, kernel, weights, plan, theta0, rng, adapt_interval,
         burnin_fraction, threads, stagnation_window, rw_state=None, **kw):
    started = time.perf_counter()
    sim, s_obs, weights, rng = _prepare(model, data, summaries, weights, threads, rng)
    try:
        theta = _initial_theta(model, theta0, rng)
        rw = rw_state or AdaptiveRWState.initial(theta, adapt_interval=adapt_interval)
        chain = _Chain(model, sim, s_obs, kernel, weights, plan, theta, rw, rng,
                       burnin_fraction, stagnation_window, **kw)
        trace, _ = chain.run()
    finally:
        sim.close()
    return _summarize(chain, trace, burnin_fraction, started)


def abc_mcmc(model: Model, data: Dataset, delta_schedule: DeltaSchedule, iterations: int,
             rng, *, summaries: SummaryProjection | None = None,
             kernel: str = "gaussian", weights: WeightMatrix | None = None,
             theta0=None, adapt_interval: int | None = 1000, burnin_fraction: float = 0.1,
             threads: int = 1, stagnation_window: int = 5000,
             explicit_proposal_ratio: bool = False) -> DcResult:
    """ABC-MCMC with an adaptive random walk and a decreasing threshold (K = 1).

    Parameters
    ----------
    model : Model
        Simulator and prior; parameters live on the model's inference scale.
    data : Dataset
        Observed data; its summaries are the comparison target.
    delta_schedule : DeltaSchedule
    iterations : int
        Number of Metropolis-Hastings steps R.
    rng : RandomSource or int
        Master random source (an int is used as the master seed).
    summaries : SummaryProjection, optional
        Summary map; the model's builtin summaries when omitted.
    kernel : {"gaussian", "uniform"}
    weights : WeightMatrix, optional
        Diagonal Omega; unit weights when omitted.
    theta0 : array_like, optional
        Starting point; drawn from the prior when omitted.
    """
    if iterations < 1:
        raise DomainError("iterations must be at least 1")
    plan = _Plan(_breakpoint_array(delta_schedule.breakpoints, iterations, float),
                 np.ones(iterations, dtype=np.int64))
    return _run(model, data, summaries, kernel, weights, plan, theta0, rng, adapt_interval,
                burnin_fraction, threads, stagnation_window,
                explicit_proposal_ratio=explicit_proposal_ratio)


def static_abc_dc(model: Model, data: Dataset, delta: float, clones: int, iterations: int,
                  rng, *, summaries: SummaryProjection | None = None,
                  kernel: str = "gaussian", weights: WeightMatrix | None = None,
                  theta0=None, adapt_interval: int | None = 1000,
                  burnin_fraction: float = 0.1, threads: int = 1,
                  stagnation_window: int = 5000, rw_state: AdaptiveRWState | None = None,
                  explicit_proposal_ratio: bool = False) -> DcResult:
    """ABC with data cloning at a fixed ``(delta, K)``.

    Each iteration simulates K datasets under the proposal and uses the
    product of their kernels as q#.  With K = 1 this is exactly
    :func:`abc_mcmc` at a constant threshold.
    """
    if clones < 1 or int(clones) != clones:
        raise DomainError("K must be a positive integer")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if iterations < 1:
        raise DomainError("iterations must be at least 1")
    plan = _Plan(np.full(iterations, float(delta)), np.full(iterations, int(clones), np.int64))
    return _run(model, data, summaries, kernel, weights, plan, theta0, rng, adapt_interval,
                burnin_fraction, threads, stagnation_window, rw_state=rw_state,
                explicit_proposal_ratio=explicit_proposal_ratio)


def dynamic_abc_dc(model: Model, data: Dataset, config: AbcDcConfig, *,
                   summaries: SummaryProjection | None = None, kernel: str = "gaussian",
                   weights: WeightMatrix | None = None, theta0=None, rng=None,
                   threads: int = 1) -> DcResult:
    """Dynamic ABC with data cloning.

    A K = 1 random-walk stage walks down the delta schedule while tracking the
    best ``log q# + log prior`` seen at the final threshold.  Once K exceeds 1
    the chain switches to a Gaussian independence sampler centred on that mode
    (or on the regression-adjusted draws), re-simulating q* whenever K grows so
    that numerator and denominator use the same number of clones.  Estimates
    come from the post-burnin draws at the largest K.
    """
    R = config.total_iterations
    plan = _Plan(
        _breakpoint_array(config.delta_schedule.breakpoints, R, float),
        _breakpoint_array(config.clone_schedule.breakpoints, R, np.int64),
        dynamic=True,
        track_from=config.delta_schedule.final_start,
        cloning_start=config.clone_schedule.cloning_start,
    )
    if plan.cloning_start is not None and plan.cloning_start <= R:
        if plan.cloning_start <= plan.track_from:
            raise ConfigError("the final threshold must be used for at least one K=1 "
                              "iteration before cloning starts")
    rng = as_random_source(config.master_seed if rng is None else rng)
    return _run(model, data, summaries, kernel, weights, plan, theta0, rng,
                config.adapt_interval, config.burnin_fraction, threads,
                config.stagnation_window, regression=config.use_regression_adjustment,
                center_rule=config.center_rule)


# -- plain data cloning with a tractable measurement density ---------------

def cloned_log_likelihood(model: Model, data: Dataset, latents: Sequence[np.ndarray],
                          theta) -> float:
    """log q = sum over clones of the measurement log-density f(y | X_k, theta)."""
    return float(sum(model.measurement_log_density(data, x, theta) for x in latents))


def dc_mcmc(model: Model, data: Dataset, clones: int, iterations: int,
            proposal: AdaptiveRWState | None = None, rng=None, *, theta0=None,
            burnin_fraction: float = 0.1, threads: int = 1) -> DcResult:
    """Data-cloning Metropolis-Hastings for models with a tractable measurement density.

    Latent paths are simulated blindly from the model, so their transition
    densities cancel and q is the product of measurement densities over the
    K clones.  Proposals with a non-finite q are rejected and counted.
    """
    if not model.has_measurement_density:
        raise DomainError(f"model {model.name} has no measurement density")
    if clones < 1:
        raise DomainError("K must be a positive integer")
    started = time.perf_counter()
    rng = as_random_source(rng)
    theta = _initial_theta(model, theta0, rng)
    rw = proposal or AdaptiveRWState.initial(theta)
    prior = model.prior
    pool = CloneSimulator(model, None, threads)
    nonfinite = 0

    def log_q(th, tag, j):
        latents = pool.map(lambda k: model.simulate_latent(th, rng.child(tag, j, k)),
                           range(clones))
        return cloned_log_likelihood(model, data, latents, th)

    trace = ChainTrace.allocate(iterations, model.param_names)
    lp = prior.log_density(theta)
    if lp == -math.inf:
        raise ConfigError("initial parameter lies outside the prior support")
    lq = log_q(theta, STREAM_CLONE, 0)
    if not math.isfinite(lq):
        lq = -math.inf
    try:
        for j in range(1, iterations + 1):
            step = rng.child(STREAM_STEP, j)
            prop = rw_propose(rw, theta, step)
            u = step.uniform()
            lp_prop = prior.log_density(prop)
            accepted = False
            if lp_prop != -math.inf:
                lq_prop = log_q(prop, STREAM_CLONE, j)
                if not math.isfinite(lq_prop):
                    nonfinite += 1
                elif u < acceptance_probability(lq_prop, lq, lp_prop, lp):
                    accepted = True
                    theta, lp, lq = prop, lp_prop, lq_prop
            trace.clones[j - 1] = clones
            trace.qstar_clones[j - 1] = clones
            trace.theta[j - 1] = theta
            trace.log_kernel[j - 1] = lq
            trace.accepted[j - 1] = accepted
            if rw.should_adapt(j):
                rw = rw_adapt(rw, trace.theta[:j])
    finally:
        pool.close()
    trace.finalize()
    chain = _Chain.__new__(_Chain)
    chain.model, chain.tracker, chain.adjustment, chain.s_obs = model, None, None, None
    chain.warnings = []
    if nonfinite:
        msg = f"{nonfinite} proposals rejected for a non-finite measurement density"
        logger.warning(msg)
        chain.warnings.append(msg)
    return _summarize(chain, trace, burnin_fraction, started)
