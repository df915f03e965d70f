import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fidux as fx


def two_subject_risk():
    ds = fx.SurvivalDataset(x=np.array([[0.0], [0.0]]), y=np.array([1.0, 3.0]),
                            delta=np.array([1, 1]))
    return fx.build_risk_structure(ds), ds


def test_exposures_single_subject():
    ds = fx.SurvivalDataset(x=np.array([[0.0]]), y=np.array([2.0]), delta=np.array([1]))
    risk = fx.build_risk_structure(ds)
    l = fx.compute_exposures(risk, ds, np.zeros(1))
    assert np.allclose(l, [2.0, 0.0])


def test_exposures_min_arithmetic():
    risk, ds = two_subject_risk()
    l = fx.compute_exposures(risk, ds, np.zeros(1))
    assert np.allclose(l, [2.0, 2.0, 0.0])


def test_exposures_scale_with_intercept_shift():
    rng = np.random.default_rng(5)
    ds = fx.SurvivalDataset(x=rng.normal(size=(6, 1)), y=rng.exponential(1, 6) + 0.1,
                            delta=np.array([1, 0, 1, 1, 0, 1]))
    risk = fx.build_risk_structure(ds)
    base = fx.compute_exposures(risk, ds, np.array([0.7]))
    shifted_ds = fx.SurvivalDataset(x=ds.x + 2.0, y=ds.y, delta=ds.delta)
    shifted_risk = fx.build_risk_structure(shifted_ds)
    shifted = fx.compute_exposures(shifted_risk, shifted_ds, np.array([0.7]))
    assert np.allclose(shifted, np.exp(0.7 * 2.0) * base)


def test_last_interval_rate_exact():
    assert fx.last_interval_rate(np.array([3.0, 2.0, 0.5])) == max(2.0, 1.0)
    assert fx.last_interval_rate(np.array([1.0, 4.0])) == max(1.0, 8.0)


def test_sample_baseline_reproducible():
    risk, ds = two_subject_risk()
    a = fx.sample_baseline(risk, ds, np.zeros(1), fx.substream(4))
    b = fx.sample_baseline(risk, ds, np.zeros(1), fx.substream(4))
    assert np.array_equal(a.rates, b.rates)
    assert np.all(a.rates > 0)
    assert np.allclose(a.knots, [0.0, 1.0, 3.0])


def test_sample_baseline_monte_carlo_mean():
    risk, ds = two_subject_risk()
    rng = fx.substream(6)
    draws = np.array([fx.sample_baseline(risk, ds, np.zeros(1), rng).rates[0]
                      for _ in range(20000)])
    # first interval exposure is 2, so the mean rate is 1/2
    assert draws.mean() == pytest.approx(0.5, rel=0.02)


def test_cumulative_zero_and_rectangle():
    s = fx.BaselineHazardSample(knots=np.array([0.0, 2.0]), rates=np.array([1.5, 0.7]),
                                exposures=np.array([1.0, 0.5]), max_observed_time=5.0)
    assert s.cumulative(0.0) == 0.0
    assert s.cumulative(1.0) == pytest.approx(1.5)
    assert s.cumulative(2.0) == pytest.approx(3.0)
    # beyond the last knot the final rate applies
    assert s.cumulative(3.0) == pytest.approx(3.0 + 0.7)


def test_cumulative_warns_beyond_observed():
    s = fx.BaselineHazardSample(knots=np.array([0.0, 2.0]), rates=np.array([1.0, 1.0]),
                                exposures=np.array([1.0, 0.5]), max_observed_time=2.5)
    with pytest.warns(UserWarning, match="unsupported"):
        s.cumulative(4.0)


def test_cumulative_rejects_negative_time():
    s = fx.BaselineHazardSample(knots=np.array([0.0, 1.0]), rates=np.array([1.0, 1.0]),
                                exposures=np.array([1.0, 0.0]), max_observed_time=1.0)
    with pytest.raises(fx.DataError):
        s.cumulative(-0.5)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_cumulative_piecewise_linear_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 6)
    knots = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 5.0, k))])
    rates = rng.exponential(1.0, k + 1) + 1e-3
    s = fx.BaselineHazardSample(knots=knots, rates=rates,
                                exposures=np.ones(k + 1), max_observed_time=10.0)
    ts = np.sort(rng.uniform(0, 8.0, 20))
    vals = s.cumulative(ts)
    assert np.all(np.diff(vals) >= -1e-12)
    # exact slope inside each interval
    mid = (knots[-1] + (knots[-2] if k >= 1 else 0.0)) / 2.0
    eps = min(1e-4, (knots[-1] - mid) / 2)
    if eps > 0:
        slope = (s.cumulative(mid + eps) - s.cumulative(mid - eps)) / (2 * eps)
        assert slope == pytest.approx(rates[-2], rel=1e-6)


def test_exponential_inverse_cdf_form():
    # rate draws reproduce -log(W)/rate for the stream's uniforms
    risk, ds = two_subject_risk()
    seed = 99
    sample = fx.sample_baseline(risk, ds, np.zeros(1), fx.substream(seed))
    rng = fx.substream(seed)
    expected = []
    rate_params = [2.0, 2.0, max(2.0, 0.0)]
    for r in rate_params:
        expected.append(-np.log(rng.random()) / r)
    assert np.allclose(sample.rates, expected)
