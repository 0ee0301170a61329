import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcabc import (
    BootstrapError,
    DcabcError,
    DomainError,
    KernelSpec,
    NumericalError,
    RandomSource,
    WeightMatrix,
    asymptotic_se,
    eigenvalue_decay,
    parametric_bootstrap,
    regression_adjust,
)
from dcabc.inference import histogram_mode
from dcabc.models import Gbm2dModel, gbm2d_closed_form_mle

WIDE = KernelSpec("gaussian", 1e6, WeightMatrix.unit(1))


def test_linear_noiseless_case_is_exact():
    S = np.linspace(-1, 1, 50)[:, None]
    theta = 2 + 3 * S
    adj = regression_adjust(theta, S, [0.0], WIDE)
    assert adj.beta_hat[0, 0] == pytest.approx(3.0, abs=1e-10)
    np.testing.assert_allclose(adj.adjusted_draws, 2.0, atol=1e-10)
    assert adj.center[0] == pytest.approx(2.0, abs=1e-10)


def test_uncorrelated_summaries_leave_draws_unchanged():
    S = np.tile([-1.0, 1.0], 20)[:, None]
    theta = np.column_stack([np.r_[np.zeros(10), np.ones(10)].repeat(2)])
    # theta balanced within each S value, so the slope is zero
    adj = regression_adjust(theta, S, [0.0], WIDE)
    assert abs(adj.beta_hat[0, 0]) < 1e-12
    np.testing.assert_allclose(adj.adjusted_draws, theta, atol=1e-12)


def test_all_summaries_equal_observed():
    theta = np.random.default_rng(0).normal(size=(20, 2))
    S = np.full((20, 1), 5.0)
    adj = regression_adjust(theta, S, [5.0], WIDE)
    np.testing.assert_allclose(adj.adjusted_draws, theta)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 5))
def test_adjustment_never_increases_weighted_rss(seed, delta):
    r = np.random.default_rng(seed)
    S = r.normal(size=(60, 2))
    theta = S @ r.normal(size=(2, 3)) + r.normal(size=(60, 3))
    s_obs = r.normal(size=2) * 0.3
    spec = KernelSpec("gaussian", delta, WeightMatrix.unit(2))
    adj = regression_adjust(theta, S, s_obs, spec)
    w = adj.weights
    before = np.sum(w[:, None] * (theta - np.average(theta, axis=0, weights=w)) ** 2, axis=0)
    after = np.sum(w[:, None] * (theta - (S - s_obs) @ adj.beta_hat - adj.alpha_hat) ** 2, axis=0)
    assert np.all(after <= before * (1 + 1e-9) + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100))
def test_adjustment_is_location_equivariant(seed, shift):
    r = np.random.default_rng(seed)
    S = r.normal(size=(40, 2))
    theta = r.normal(size=(40, 2)) + S
    spec = KernelSpec("gaussian", 1.0, WeightMatrix.unit(2))
    a = regression_adjust(theta, S, [0.1, -0.1], spec)
    b = regression_adjust(theta + shift, S, [0.1, -0.1], spec)
    np.testing.assert_allclose(b.adjusted_draws, a.adjusted_draws + shift, atol=1e-8)
    np.testing.assert_allclose(b.center, a.center + shift, atol=1e-8)


def test_adjustment_weights_follow_kernel():
    S = np.array([[0.0], [1.0], [2.0], [3.0]])
    spec = KernelSpec("gaussian", 1.0, WeightMatrix.unit(1))
    adj = regression_adjust(np.arange(4.0)[:, None] ** 2, S, [0.0], spec)
    np.testing.assert_allclose(adj.weights, np.exp(-S[:, 0] ** 2 / 2))


def test_adjustment_preconditions():
    with pytest.raises(DomainError):
        regression_adjust(np.zeros((3, 1)), np.zeros((3, 2)), [0, 0], WIDE)
    with pytest.raises(DomainError):
        regression_adjust(np.zeros((5, 1)), np.zeros((4, 1)), [0], WIDE)
    with pytest.raises(DomainError):
        regression_adjust(np.zeros((5, 1)), np.zeros((5, 1)), [0], WIDE, center_rule="median")


def test_mode_center_rule():
    r = np.random.default_rng(1)
    theta = np.r_[r.normal(0, 0.1, 900), r.normal(5, 0.1, 300)][:, None]
    S = np.zeros((1200, 1))
    adj = regression_adjust(theta, S, [0.0], WIDE, center_rule="mode")
    assert abs(adj.center[0]) < 0.2
    assert histogram_mode(np.full(10, 3.0)) == 3.0


def test_eigenvalue_decay():
    r = np.random.default_rng(2)
    assert eigenvalue_decay({1: np.ones((10, 3))}) == [(1, 0.0)]
    (k, lam), = eigenvalue_decay({3: r.normal(size=(10_000, 2))})
    assert k == 3 and lam == pytest.approx(1.0, rel=0.1)
    draws = {5: r.normal(size=(100, 2)) * 0.2, 1: r.normal(size=(100, 2))}
    out = eigenvalue_decay(draws)
    assert [k for k, _ in out] == [1, 5] and out[0][1] > out[1][1]
    perm = {k: v[r.permutation(len(v))] for k, v in draws.items()}
    np.testing.assert_allclose([l for _, l in eigenvalue_decay(perm)], [l for _, l in out])
    with pytest.raises(DomainError):
        eigenvalue_decay({1: np.ones((1, 2))})


def test_asymptotic_se():
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    np.testing.assert_array_equal(asymptotic_se(cov, 1), np.sqrt(np.diag(cov)))
    np.testing.assert_array_equal(asymptotic_se(cov, 15), np.sqrt(15 * np.diag(cov)))
    np.testing.assert_allclose(asymptotic_se(cov, 8), np.sqrt(2) * asymptotic_se(cov, 4))
    with pytest.raises(NumericalError):
        asymptotic_se(np.array([[-1.0]]), 2)
    with pytest.raises(DomainError):
        asymptotic_se(cov, 0)


def test_bootstrap_identity_estimator_gives_zero_width():
    m = Gbm2dModel(times=np.linspace(0, 1, 21))
    theta = np.array([1.7, -0.8, 1.3, -1.2, 0.3])
    rep = parametric_bootstrap(m, lambda data, rng: theta, theta, 5, RandomSource(0))
    np.testing.assert_array_equal(rep.percentile_2_5, theta)
    np.testing.assert_array_equal(rep.percentile_97_5, theta)
    assert rep.missing == 0


def test_bootstrap_closed_form_mle(tmp_path):
    m = Gbm2dModel()
    theta = np.array([1.7, -0.8, 1.3, -1.2, 0.3])
    rep = parametric_bootstrap(m, lambda d, rng: gbm2d_closed_form_mle(d), theta, 30,
                               RandomSource(3), truth=theta)
    assert np.all(np.abs(rep.bias) < 2 * np.array([0.3021, 0.0552, 0.1727, 0.0317, 0.0570]))
    lo, mid, hi = rep.percentile(2.5), rep.percentile(50), rep.percentile(97.5)
    assert np.all(lo <= mid) and np.all(mid <= hi)
    rep.write(tmp_path / "b.json", tmp_path / "b.csv")
    doc = json.loads((tmp_path / "b.json").read_text())
    assert doc["replicates"] == 30
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0].startswith("parameter,mean,p2.5,p97.5") and len(lines) == 6


def test_bootstrap_is_order_independent():
    m = Gbm2dModel(times=np.linspace(0, 1, 51))
    theta = np.array([1.7, -0.8, 1.3, -1.2, 0.3])
    est = lambda d, rng: gbm2d_closed_form_mle(d)
    a = parametric_bootstrap(m, est, theta, 6, RandomSource(1), threads=1)
    b = parametric_bootstrap(m, est, theta, 6, RandomSource(1), threads=3)
    assert np.array_equal(a.replicate_estimates, b.replicate_estimates)


def _flaky(fail_every):
    def est(data, rng):
        if rng.stream_id[0] % fail_every == 0:
            raise DcabcError("replicate failed")
        return np.zeros(5)
    return est


def test_bootstrap_missing_replicates():
    m = Gbm2dModel(times=np.linspace(0, 1, 11))
    rep = parametric_bootstrap(m, _flaky(5), np.zeros(5), 10, RandomSource(0))
    assert rep.missing == 2 and rep.replicate_estimates.shape == (8, 5)
    with pytest.raises(BootstrapError):
        parametric_bootstrap(m, _flaky(3), np.zeros(5), 10, RandomSource(0))
    with pytest.raises(DomainError):
        parametric_bootstrap(m, _flaky(3), np.zeros(5), 1, RandomSource(0))
