import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcabc import (
    AbcDcConfig,
    CloneSchedule,
    ConfigError,
    DeltaSchedule,
    ModeTracker,
    RandomSource,
    StagnationError,
    WeightMatrix,
    abc_mcmc,
    dc_mcmc,
    dynamic_abc_dc,
    static_abc_dc,
)
from dcabc.models import DiscreteToyModel, GandKModel, GompertzModel
from dcabc.samplers import acceptance_probability, cloned_log_likelihood

TOY = DiscreteToyModel()
TOY_DATA = TOY.observed(7)
logp = st.one_of(st.floats(-1e6, 10, allow_nan=False), st.just(-math.inf))


@settings(max_examples=300, deadline=None)
@given(logp, logp, logp, st.floats(-1e3, 1e3, allow_nan=False), st.floats(-50, 50))
def test_acceptance_probability_in_unit_interval(qn, qc, pn, pc, ratio):
    a = acceptance_probability(qn, qc, pn, pc, ratio)
    assert 0.0 <= a <= 1.0


def test_acceptance_probability_edge_cases():
    assert acceptance_probability(-math.inf, -math.inf, 0.0, 0.0) == 0.0
    assert acceptance_probability(-3.0, -math.inf, 0.0, 0.0) == 1.0
    assert acceptance_probability(-1.0, 0.0, 0.0, 0.0) == pytest.approx(math.exp(-1.0))
    assert acceptance_probability(0.0, 0.0, -math.inf, 0.0) == 0.0


def test_static_k1_equals_abc_mcmc():
    a = abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(1.0), 3000, RandomSource(5), theta0=[7.5])
    b = static_abc_dc(TOY, TOY_DATA, 1.0, 1, 3000, RandomSource(5), theta0=[7.5])
    assert np.array_equal(a.trace.theta, b.trace.theta)
    assert np.array_equal(a.trace.accepted, b.trace.accepted)


def test_symmetric_proposal_ratio_can_be_omitted():
    kw = dict(theta0=[3.0, 1.5, 1.0, 0.3], weights=WeightMatrix.from_scales([.22, .19, .53, 2.96, 1.9]))
    m = GandKModel(n=200)
    data = m.simulate([3, 1, 2, 0.5], RandomSource(1))
    a = static_abc_dc(m, data, 1.0, 2, 400, RandomSource(2), **kw)
    b = static_abc_dc(m, data, 1.0, 2, 400, RandomSource(2), explicit_proposal_ratio=True, **kw)
    assert np.array_equal(a.trace.accepted, b.trace.accepted)
    assert a.trace.accepted.any()


def test_dynamic_without_cloning_equals_abc_mcmc():
    sched = DeltaSchedule(((1, 2.0), (501, 1.0)))
    cfg = AbcDcConfig(sched, CloneSchedule(((1, 1),)), 1500, master_seed=3)
    a = dynamic_abc_dc(TOY, TOY_DATA, cfg, theta0=[2.5])
    b = abc_mcmc(TOY, TOY_DATA, sched, 1500, RandomSource(3), theta0=[2.5])
    assert np.array_equal(a.trace.theta, b.trace.theta)
    assert a.mode_tracker.updates > 0


def test_threshold_change_rescales_current_kernel_without_resimulating():
    sched = DeltaSchedule(((1, 2.0), (301, 1.0)))
    r = abc_mcmc(TOY, TOY_DATA, sched, 600, RandomSource(9), theta0=[7.2])
    t = r.trace
    # log J is proportional to 1/delta^2 for the same simulated summaries
    j = 300  # zero-based index of iteration 301
    if not t.accepted[j]:
        assert t.log_kernel[j] == pytest.approx(4.0 * t.log_kernel[j - 1])
        assert np.array_equal(t.summaries[j], t.summaries[j - 1])


def test_qstar_always_uses_current_clone_count():
    cfg = AbcDcConfig(DeltaSchedule.constant(2.0), CloneSchedule(((1, 1), (401, 3), (701, 5))),
                      1000, master_seed=1)
    r = dynamic_abc_dc(TOY, TOY_DATA, cfg, theta0=[7.5])
    assert np.array_equal(r.trace.qstar_clones, r.trace.clones)
    assert [g.clones for g in r.trace.regimes] == [1, 3, 5]
    assert r.final_clones == 5
    np.testing.assert_allclose(r.asymptotic_mle_covariance, 5 * r.final_slice_covariance)


def test_clone_threads_do_not_change_results():
    m = GandKModel(n=300)
    data = m.simulate([3, 1, 2, 0.5], RandomSource(4))
    kw = dict(theta0=[3.0, 1.0, 2.0, 0.5], weights=WeightMatrix.from_scales([.22, .19, .53, 2.96, 1.9]))
    a = static_abc_dc(m, data, 0.5, 5, 300, RandomSource(6), threads=1, **kw)
    b = static_abc_dc(m, data, 0.5, 5, 300, RandomSource(6), threads=3, **kw)
    assert np.array_equal(a.trace.theta, b.trace.theta)
    assert np.array_equal(a.trace.log_kernel, b.trace.log_kernel)


def test_cloning_before_final_threshold_is_rejected():
    with pytest.raises(ConfigError):
        AbcDcConfig(DeltaSchedule(((1, 1.0), (500, 0.5))), CloneSchedule(((1, 1), (400, 2))), 1000)
    with pytest.raises(ConfigError):
        AbcDcConfig(DeltaSchedule.constant(1.0), CloneSchedule(((1, 1),)), 0)


def test_cloning_at_first_final_threshold_iteration_is_rejected():
    cfg = AbcDcConfig(DeltaSchedule(((1, 1.0), (500, 0.5))), CloneSchedule(((1, 1), (500, 2))), 1000)
    with pytest.raises(ConfigError):
        dynamic_abc_dc(TOY, TOY_DATA, cfg, theta0=[7.5])


def test_stagnation_in_final_regime_is_an_error():
    cfg = AbcDcConfig(DeltaSchedule.constant(0.1), CloneSchedule(((1, 1), (201, 40))), 600,
                      stagnation_window=100)
    with pytest.raises(StagnationError):
        dynamic_abc_dc(TOY, TOY_DATA, cfg, kernel="uniform", theta0=[7.5])


def test_stagnation_warning_during_k1_stage():
    r = abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(0.01), 300, RandomSource(0),
                 kernel="uniform", theta0=[0.2], stagnation_window=50)
    assert r.warnings and "consecutive" in r.warnings[0]


def test_mode_tracker():
    mt = ModeTracker()
    assert mt.update(-3.0, [1.0])
    assert not mt.update(-4.0, [2.0])
    assert mt.update(-1.0, [3.0])
    assert mt.best_theta.tolist() == [3.0] and mt.updates == 3


def test_mode_tracker_sees_rejected_proposals():
    cfg = AbcDcConfig(DeltaSchedule.constant(1.0), CloneSchedule(((1, 1), (1001, 4))), 1500,
                      master_seed=2)
    r = dynamic_abc_dc(TOY, TOY_DATA, cfg, theta0=[7.5])
    k1 = r.trace.accepted[:1000].sum()
    assert r.mode_tracker.updates > k1
    assert r.mode_tracker.best_theta is not None


def test_single_iteration_run():
    r = abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(1.0), 1, RandomSource(0), theta0=[7.5])
    assert len(r.trace) == 1
    assert r.final_slice_mean.values.shape == (1,)
    json.dumps(r.to_json())


def test_start_outside_prior_is_rejected():
    with pytest.raises(ConfigError):
        abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(1.0), 10, RandomSource(0), theta0=[20.0])


def test_prior_start_is_reproducible():
    a = abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(1.0), 50, RandomSource(8))
    b = abc_mcmc(TOY, TOY_DATA, DeltaSchedule.constant(1.0), 50, RandomSource(8))
    assert np.array_equal(a.trace.theta, b.trace.theta)


def test_regression_adjusted_dynamic_run():
    cfg = AbcDcConfig(DeltaSchedule.constant(1.0), CloneSchedule(((1, 1), (1001, 3))), 1400,
                      use_regression_adjustment=True, master_seed=4)
    r = dynamic_abc_dc(TOY, TOY_DATA, cfg, theta0=[7.5])
    assert r.adjustment is not None
    assert r.adjustment.adjusted_draws.shape[0] == 900
    doc = json.loads(json.dumps(r.to_json()))
    assert doc["regression_adjustment"]["beta_hat"]


def test_cloned_log_likelihood_identical_latents():
    m = GompertzModel()
    theta = np.array([8.0, 2.6, 0.0])
    data = m.simulate(theta, RandomSource(1))
    x = m.simulate_latent(theta, RandomSource(2))
    one = m.measurement_log_density(data, x, theta)
    assert cloned_log_likelihood(m, data, [x], theta) == one
    assert cloned_log_likelihood(m, data, [x] * 6, theta) == pytest.approx(6 * one)


def test_dc_mcmc_runs_and_is_reproducible():
    m = GompertzModel()
    data = m.simulate([8.01, 2.639, 0.0], RandomSource(3))
    a = dc_mcmc(m, data, 2, 300, rng=RandomSource(4), theta0=[8.0, 2.6, 0.0])
    b = dc_mcmc(m, data, 2, 300, rng=RandomSource(4), theta0=[8.0, 2.6, 0.0], threads=2)
    assert np.array_equal(a.trace.theta, b.trace.theta)
    assert a.final_clones == 2
    assert np.all(np.isfinite(a.trace.log_kernel))


def test_dc_mcmc_requires_measurement_density():
    from dcabc import DomainError
    with pytest.raises(DomainError):
        dc_mcmc(TOY, TOY_DATA, 2, 10, rng=RandomSource(0))
