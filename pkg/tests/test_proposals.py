import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcabc import AdaptiveRWState, DomainError, IndependenceSamplerSpec, NumericalError, RandomSource
from dcabc.proposals import mis_log_density, mis_propose, rw_adapt, rw_log_density, rw_propose

pts = arrays(float, 3, elements=st.floats(-20, 20, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(pts, pts)
def test_random_walk_is_symmetric(a, b):
    state = AdaptiveRWState(np.array([[1.0, 0.3, 0.0], [0.3, 2.0, 0.1], [0.0, 0.1, 0.5]]))
    assert rw_log_density(state, a, b) == rw_log_density(state, b, a)


def test_rw_propose_moments():
    cov = np.array([[1.0, 0.5], [0.5, 2.0]])
    state = AdaptiveRWState(cov)
    x = np.array([rw_propose(state, [1.0, -1.0], RandomSource(3, i)) for i in range(20000)])
    np.testing.assert_allclose(x.mean(0), [1.0, -1.0], atol=0.04)
    np.testing.assert_allclose(np.cov(x, rowvar=False), cov, atol=0.06)


def test_adaptation_schedule_and_covariance(np_rng):
    state = AdaptiveRWState.initial([1.0, 2.0], adapt_interval=1000)
    assert not state.should_adapt(999) and state.should_adapt(1000) and state.should_adapt(2000)
    hist = np_rng.normal(size=(1000, 2)) * [1.0, 3.0]
    new = rw_adapt(state, hist)
    np.testing.assert_allclose(new.covariance,
                               2.38 ** 2 / 2 * np.cov(hist, rowvar=False) + 1e-10 * np.eye(2))
    assert new.sample_count == 1000
    assert not AdaptiveRWState.initial([1.0], adapt_interval=None).should_adapt(1000)


def test_adaptation_of_constant_history_stays_positive_definite():
    state = AdaptiveRWState.initial([1.0, 2.0])
    new = rw_adapt(state, np.ones((50, 2)))
    assert np.all(np.linalg.eigvalsh(new.covariance) > 0)


def test_non_spd_covariance_rejected():
    with pytest.raises(NumericalError):
        AdaptiveRWState(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericalError):
        IndependenceSamplerSpec([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])


def test_independence_sampler():
    spec = IndependenceSamplerSpec([1.0, 2.0], [[0.5, 0.1], [0.1, 0.2]])
    assert mis_log_density(spec, [1.0, 2.0]) == 0.0
    x = np.array([1.5, 1.0])
    d = x - spec.center
    assert mis_log_density(spec, x) == pytest.approx(-0.5 * d @ np.linalg.solve(spec.covariance, d))
    draws = np.array([mis_propose(spec, RandomSource(1, i)) for i in range(20000)])
    np.testing.assert_allclose(draws.mean(0), spec.center, atol=0.02)
    with pytest.raises(DomainError):
        mis_log_density(spec, [1.0, 2.0, 3.0])


def test_dimension_mismatch_on_propose():
    with pytest.raises(DomainError):
        rw_propose(AdaptiveRWState(np.eye(2)), [1.0, 2.0, 3.0], RandomSource(0))
