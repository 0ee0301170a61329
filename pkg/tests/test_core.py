import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcabc import (
    ChainTrace,
    CloneSchedule,
    ConfigError,
    Dataset,
    DeltaSchedule,
    DomainError,
    ParameterVector,
    RandomSource,
    active_clones,
    active_delta,
)
from dcabc.core import stream_slice_moments


def test_parameter_vector_natural_scale():
    p = ParameterVector([np.log(2.0), 0.5], ("logA", "rho"), (True, False))
    np.testing.assert_allclose(p.natural(), [2.0, 0.5])
    assert p.as_dict() == {"logA": pytest.approx(np.log(2.0)), "rho": 0.5}


def test_parameter_vector_rejects_bad_input():
    with pytest.raises(DomainError):
        ParameterVector([1.0, 2.0], ("a",), (False,))
    with pytest.raises(DomainError):
        ParameterVector([np.nan], ("a",), (False,))


def test_parameter_vector_is_immutable():
    p = ParameterVector([1.0], ("a",), (False,))
    with pytest.raises(ValueError):
        p.values[0] = 3.0


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        Dataset([0.0, 1.0], [1.0, 2.0, 3.0])


def test_dataset_csv_round_trip(tmp_path):
    d = Dataset([0.0, 0.5, 1.0], [[1.0, 2.0], [1.1 / 3, 2.5], [np.pi, 1e-300]])
    d.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.times, d.times)
    assert np.array_equal(back.observations, d.observations)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "t,x,y"


def test_delta_schedule_lookup():
    s = DeltaSchedule(((1, 0.3), (10001, 0.1), (20001, 0.05)))
    assert active_delta(s, 1) == 0.3
    assert active_delta(s, 10000) == 0.3
    assert active_delta(s, 10001) == 0.1
    assert active_delta(s, 10 ** 9) == 0.05
    assert s.final == 0.05 and s.final_start == 20001
    with pytest.raises(DomainError):
        active_delta(s, 0)


@pytest.mark.parametrize("bps", [
    ((2, 1.0),),
    ((1, 1.0), (1, 0.5)),
    ((1, 0.5), (10, 1.0)),
    ((1, 0.0),),
])
def test_delta_schedule_invalid(bps):
    with pytest.raises(ConfigError):
        DeltaSchedule(bps)


def test_delta_schedule_every():
    s = DeltaSchedule.every([0.3, 0.1, 0.05, 0.015], 10000)
    assert s.breakpoints == ((1, 0.3), (10001, 0.1), (20001, 0.05), (30001, 0.015))


def test_clone_schedule():
    s = CloneSchedule(((1, 1), (7001, 15)))
    assert active_clones(s, 7000) == 1 and active_clones(s, 7001) == 15
    assert s.final == 15 and s.cloning_start == 7001
    assert CloneSchedule(((1, 1),)).cloning_start is None
    for bad in [((1, 2),), ((1, 1), (5, 1)), ((1, 1), (5, 4), (9, 3))]:
        with pytest.raises(ConfigError):
            CloneSchedule(bad)


def test_random_source_is_addressed_by_path():
    a = RandomSource(7).child(0, 12, 3).standard_normal(5)
    b = RandomSource(7, (0, 12)).child(3).standard_normal(5)
    assert np.array_equal(a, b)
    c = RandomSource(7).child(0, 12, 4).standard_normal(5)
    d = RandomSource(8).child(0, 12, 3).standard_normal(5)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 2 ** 31), min_size=1, max_size=4),
       st.lists(st.integers(0, 2 ** 31), min_size=1, max_size=4))
def test_distinct_paths_give_distinct_streams(p1, p2):
    x = RandomSource(1, p1).standard_normal(4)
    y = RandomSource(1, p2).standard_normal(4)
    assert np.array_equal(x, y) == (tuple(p1) == tuple(p2))


def _trace(n=50, d=2, seed=0):
    r = np.random.default_rng(seed)
    t = ChainTrace.allocate(n, [f"p{i}" for i in range(d)])
    t.delta[:] = np.where(np.arange(n) < 20, 0.5, 0.3)
    t.clones[:] = np.where(np.arange(n) < 30, 1, 4)
    t.theta[:] = r.normal(size=(n, d)) / 7
    t.log_kernel[:] = -r.exponential(size=n)
    t.accepted[:] = r.random(n) < 0.3
    return t.finalize()


def test_trace_regimes_and_rates():
    t = _trace()
    assert [(r.start, r.end, r.delta, r.clones) for r in t.regimes] == [
        (1, 20, 0.5, 1), (21, 30, 0.3, 1), (31, 50, 0.3, 4)]
    rates = t.acceptance_rates()
    assert rates[2]["acceptance_rate"] == pytest.approx(t.accepted[30:].mean())
    sl = t.regime_slice(t.final_regime, 0.1)
    assert (sl.start, sl.stop) == (32, 50)


def test_trace_csv_round_trip_is_exact(tmp_path):
    t = _trace()
    t.to_csv(tmp_path / "t.csv")
    back = ChainTrace.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.theta, t.theta)
    assert np.array_equal(back.log_kernel, t.log_kernel)
    assert np.array_equal(back.accepted, t.accepted)
    assert [r.start for r in back.regimes] == [r.start for r in t.regimes]
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "iter,delta,K,accepted,theta_1,theta_2,log_kernel"


def test_streamed_moments_match_in_memory(tmp_path):
    t = _trace(n=400, d=3, seed=4)
    t.to_csv(tmp_path / "t.csv")
    r = t.final_regime
    mean, cov = stream_slice_moments(tmp_path / "t.csv", r.start, r.end, 0.1)
    draws = t.theta[t.regime_slice(r, 0.1)]
    np.testing.assert_allclose(mean, draws.mean(0), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(cov, np.cov(draws, rowvar=False), rtol=1e-10, atol=1e-15)
