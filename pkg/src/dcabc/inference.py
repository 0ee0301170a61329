"""Post-processing: regression adjustment, data-cloning diagnostics, standard errors, bootstrap."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import DcabcError, DomainError, NumericalError, RandomSource, as_random_source
from .kernels import KernelSpec, log_kernels_from_sq, solve_least_squares, weighted_sq_distance

logger = logging.getLogger(__name__)


class BootstrapError(DcabcError, RuntimeError):
    """Too many bootstrap replicates failed to produce an estimate."""


@dataclass
class AdjustmentResult:
    """Output of the local-linear regression adjustment.

    Attributes
    ----------
    adjusted_draws : ndarray, shape (n, d)
        ``theta_i - (S_i - S)' beta_hat``.
    beta_hat : ndarray, shape (d_s, d)
        Slopes of each parameter coordinate on the summary discrepancies.
    alpha_hat : ndarray, shape (d,)
        Intercepts.
    center : ndarray, shape (d,)
        Mean or per-coordinate histogram mode of the adjusted draws.
    covariance : ndarray, shape (d, d)
        Sample covariance of the adjusted draws.
    weights : ndarray, shape (n,)
        Kernel weights used in the fit, scaled so the largest is 1.
    """

    adjusted_draws: np.ndarray
    beta_hat: np.ndarray
    alpha_hat: np.ndarray
    center: np.ndarray
    covariance: np.ndarray
    weights: np.ndarray


def histogram_mode(x: np.ndarray) -> float:
    """Midpoint of the fullest Freedman-Diaconis histogram bin."""
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0.0:
        return float(x[0])
    counts, edges = np.histogram(x, bins="fd")
    i = int(np.argmax(counts))
    return 0.5 * (edges[i] + edges[i + 1])


def regression_adjust(draws, sims, s_obs, kernel: KernelSpec,
                      center_rule: str = "mean") -> AdjustmentResult:
    """Weighted local-linear regression adjustment of ABC draws.

    Each parameter coordinate is regressed on ``S_i - S`` with an intercept,
    using kernel weights ``J_delta(S, S_i)``; the fitted slope is then
    removed from every draw.

    Parameters
    ----------
    draws : array_like, shape (n, d)
    sims : array_like, shape (n, d_s)
        Summaries that accompany each draw.
    s_obs : array_like, shape (d_s,)
    kernel : KernelSpec
        Supplies the kernel form, threshold and weight matrix for W.
    center_rule : {"mean", "mode"}
    """
    theta = np.atleast_2d(np.asarray(draws, dtype=float))
    S = np.atleast_2d(np.asarray(sims, dtype=float))
    s_obs = np.asarray(s_obs, dtype=float).ravel()
    n, d_s = S.shape
    if theta.shape[0] != n:
        raise DomainError(f"{theta.shape[0]} draws but {n} summary rows")
    if s_obs.size != d_s:
        raise DomainError(f"observed summaries have {s_obs.size} entries, simulated {d_s}")
    if n < d_s + 2:
        raise DomainError(f"need at least {d_s + 2} draws for the adjustment, got {n}")
    if center_rule not in ("mean", "mode"):
        raise DomainError(f"unknown center rule {center_rule!r}")

    diff = S - s_obs
    log_w = log_kernels_from_sq(kernel.kind, kernel.delta,
                                weighted_sq_distance(kernel.weights, s_obs, S))
    if not np.any(np.isfinite(log_w)):
        raise DomainError("every draw has zero kernel weight")
    w = np.exp(log_w - np.max(log_w))

    design = np.hstack([np.ones((n, 1)), diff])
    coef = solve_least_squares(design, theta, weights=w)
    alpha, beta = coef[0], coef[1:]
    adjusted = theta - diff @ beta

    if center_rule == "mean":
        center = adjusted.mean(axis=0)
    else:
        center = np.array([histogram_mode(adjusted[:, i]) for i in range(adjusted.shape[1])])
    cov = np.atleast_2d(np.cov(adjusted, rowvar=False))
    return AdjustmentResult(adjusted, beta, alpha, center, cov, w)


def eigenvalue_decay(traces_by_K: Mapping[int, np.ndarray]) -> list[tuple[int, float]]:
    """Largest eigenvalue of the sample covariance of the draws at each K, sorted by K.

    A decay towards zero as K grows indicates the parameters are estimable.
    """
    out = []
    for K in sorted(traces_by_K):
        draws = np.atleast_2d(np.asarray(traces_by_K[K], dtype=float))
        if draws.shape[0] < 2:
            raise DomainError(f"need at least 2 draws at K={K}")
        cov = np.atleast_2d(np.cov(draws, rowvar=False))
        out.append((int(K), float(max(np.linalg.eigvalsh(cov)[-1], 0.0))))
    return out


def asymptotic_se(final_slice_covariance, K: int) -> np.ndarray:
    """Standard errors of the MLE: ``sqrt(K * diag(Sigma))``."""
    if K < 1:
        raise DomainError("K must be at least 1")
    diag = np.diag(np.atleast_2d(np.asarray(final_slice_covariance, dtype=float)))
    if np.any(diag < 0) or not np.all(np.isfinite(diag)):
        raise NumericalError(f"covariance diagonal is not a valid variance: {diag}")
    return np.sqrt(K * diag)


@dataclass
class BootstrapReport:
    """Replicate estimates with means and empirical 2.5/97.5 percentiles."""

    param_names: tuple[str, ...]
    theta_hat: np.ndarray
    replicate_estimates: np.ndarray
    missing: int = 0
    truth: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.replicate_estimates = np.atleast_2d(self.replicate_estimates)
        lo, hi = self.percentile_2_5, self.percentile_97_5
        if np.any((self.means < lo) | (self.means > hi)):
            msg = "bootstrap percentiles do not bracket the mean for some coordinate"
            logger.warning(msg)
            self.warnings.append(msg)

    @property
    def means(self) -> np.ndarray:
        return self.replicate_estimates.mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.replicate_estimates.std(axis=0, ddof=1)

    def percentile(self, q: float) -> np.ndarray:
        return np.percentile(self.replicate_estimates, q, axis=0)

    @property
    def percentile_2_5(self) -> np.ndarray:
        return self.percentile(2.5)

    @property
    def percentile_97_5(self) -> np.ndarray:
        return self.percentile(97.5)

    def _reference(self):
        return self.theta_hat if self.truth is None else self.truth

    @property
    def bias(self) -> np.ndarray:
        return self.means - self._reference()

    @property
    def rmse(self) -> np.ndarray:
        return np.sqrt(np.mean((self.replicate_estimates - self._reference()) ** 2, axis=0))

    def to_json(self) -> dict:
        return {
            "param_names": list(self.param_names),
            "theta_hat": self.theta_hat.tolist(),
            "truth": None if self.truth is None else self.truth.tolist(),
            "replicates": int(self.replicate_estimates.shape[0]),
            "missing": self.missing,
            "means": self.means.tolist(),
            "percentile_2_5": self.percentile_2_5.tolist(),
            "percentile_97_5": self.percentile_97_5.tolist(),
            "bias": self.bias.tolist(),
            "rmse": self.rmse.tolist(),
            "replicate_estimates": self.replicate_estimates.tolist(),
            "warnings": list(self.warnings),
        }

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["parameter", "mean", "p2.5", "p97.5", "bias", "rmse"])
                for row in zip(self.param_names, self.means, self.percentile_2_5,
                               self.percentile_97_5, self.bias, self.rmse):
                    w.writerow([row[0]] + [f"{v:.6g}" for v in row[1:]])


def parametric_bootstrap(model, estimator: Callable, theta_hat, B: int, rng, *,
                         truth=None, threads: int = 1,
                         max_missing_fraction: float = 0.2) -> BootstrapReport:
    """Simulate B datasets at ``theta_hat`` and re-estimate on each.

    Parameters
    ----------
    model : Model
    estimator : callable
        ``estimator(dataset, rng) -> parameter vector``.  Package errors and
        non-finite estimates mark a replicate as missing.
    theta_hat : array_like or ParameterVector
    B : int
        Number of replicates, at least 2.
    rng : RandomSource or int
        Replicate ``b`` simulates from ``rng.child(b, 0)`` and hands
        ``rng.child(b, 1)`` to the estimator, so replicates are independent
        of execution order.
    truth : array_like, optional
        Reference for bias and RMSE; ``theta_hat`` when omitted.
    threads : int
        Replicates run concurrently on this many threads.
    """
    if B < 2:
        raise DomainError("B must be at least 2")
    rng: RandomSource = as_random_source(rng)
    theta_hat = np.asarray(getattr(theta_hat, "values", theta_hat), dtype=float)

    def one(b: int):
        data = model.simulate(theta_hat, rng.child(b, 0))
        try:
            est = np.asarray(getattr(e := estimator(data, rng.child(b, 1)), "values", e),
                             dtype=float)
        except DcabcError as exc:
            logger.warning("bootstrap replicate %d failed: %s", b, exc)
            return None
        if est.shape != theta_hat.shape or not np.all(np.isfinite(est)):
            logger.warning("bootstrap replicate %d returned an invalid estimate", b)
            return None
        logger.info("bootstrap replicate %d/%d: %s", b + 1, B, np.round(est, 4))
        return est

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    ok = [r for r in results if r is not None]
    missing = B - len(ok)
    if missing > max_missing_fraction * B or len(ok) < 2:
        raise BootstrapError(f"{missing} of {B} bootstrap replicates failed")
    report = BootstrapReport(tuple(model.param_names), theta_hat, np.vstack(ok), missing,
                             None if truth is None else np.asarray(truth, dtype=float))
    if missing:
        report.warnings.append(f"{missing} of {B} replicates missing")
    return report
