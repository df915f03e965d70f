import numpy as np
import pytest
from scipy import stats

import fidux as fx


def test_standard_censoring_fraction_analytic():
    # beta = 0, unit baseline, uniform(0,2) censoring:
    # P(failure observed) = integral_0^2 (1 - exp(-c)) / 2 dc = (1 + exp(-2)) / 2
    design = fx.SimulationDesign(n=50_000, beta_true=np.zeros(2))
    ds = fx.generate_standard(design, fx.substream(7))
    expected = (1 + np.exp(-2)) / 2
    assert ds.delta.mean() == pytest.approx(expected, rel=0.01)


def test_standard_reproducible():
    design = fx.SimulationDesign(n=100, beta_true=np.array([0.5, 1.0]))
    a = fx.generate_standard(design, fx.substream(3))
    b = fx.generate_standard(design, fx.substream(3))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.x, b.x)


def test_standard_conditional_mean_given_rate_two():
    # subjects with x = 1 under beta = log 2 fail at rate 2
    design = fx.SimulationDesign(n=100_000, beta_true=np.array([np.log(2.0)]),
                                 censoring=fx.CensoringLaw("fixed", 1e9))
    ds = fx.generate_standard(design, fx.substream(8))
    ones = ds.x[:, 0] == 1.0
    assert ds.y[ones].mean() == pytest.approx(0.5, rel=0.01)


def test_standard_rejects_jump_baseline():
    design = fx.SimulationDesign(n=5, beta_true=np.zeros(1), baseline_jumps=((1.0, 0.1),))
    with pytest.raises(fx.ConfigError):
        fx.generate_standard(design, fx.substream(0))


def test_sequential_single_subject_reduces_to_exponential():
    design = fx.SimulationDesign(n=1, beta_true=np.zeros(1))
    times = []
    for i in range(4000):
        d = fx.generate_sequential_dga(design, np.array([1e12]), fx.substream(1, i))
        assert d.delta[0] == 1
        times.append(d.y[0])
    assert stats.kstest(times, "expon").pvalue > 0.01


def test_sequential_subject_marginal_is_softmax():
    # without censoring the first failing subject is multinomial softmax
    beta = np.array([0.8])
    xfix = np.array([[-0.5], [0.3], [1.1]])
    probs = np.exp(xfix[:, 0] * beta[0])
    probs = probs / probs.sum()
    design = fx.SimulationDesign(n=3, beta_true=beta)
    counts = np.zeros(3)
    reps = 4000
    for r in range(reps):
        d = fx.generate_sequential_dga(design, np.full(3, 1e12), fx.substream(44, r),
                                       covariates=xfix)
        first = int(np.argmin(np.where(d.delta == 1, d.y, np.inf)))
        counts[first] += 1
    assert stats.chisquare(counts, probs * reps).pvalue > 0.01


def test_sequential_reproducible_and_censoring_applied():
    design = fx.SimulationDesign(n=8, beta_true=np.array([0.4]))
    cens = np.linspace(0.2, 1.6, 8)
    a = fx.generate_sequential_dga(design, cens, fx.substream(5))
    b = fx.generate_sequential_dga(design, cens, fx.substream(5))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.delta, b.delta)
    censored = a.delta == 0
    assert np.allclose(a.y[censored], cens[censored])
    assert np.all(a.y <= cens + 1e-12)


def test_censoring_fraction_monotone_in_horizon():
    fracs = []
    for cmax in (0.5, 1.0, 2.0, 4.0):
        design = fx.SimulationDesign(n=20_000, beta_true=np.zeros(1),
                                     censoring=fx.CensoringLaw("uniform", cmax))
        ds = fx.generate_standard(design, fx.substream(cmax_hash := int(cmax * 10)))
        fracs.append(1.0 - ds.delta.mean())
    assert all(a > b for a, b in zip(fracs, fracs[1:]))


def test_conditioned_poisson_mean_and_cap():
    rng = fx.substream(55)
    eta = 0.5
    draws = np.array([fx.sample_conditioned_poisson(eta, rng) for _ in range(30_000)])
    expected = eta / (1 - np.exp(-eta))
    assert draws.mean() == pytest.approx(expected, rel=0.01)
    assert np.all(np.array([fx.sample_conditioned_poisson(3.0, rng, max_value=2)
                            for _ in range(200)]) <= 2)
    with pytest.raises(fx.ConfigError):
        fx.sample_conditioned_poisson(0.0, rng)


def test_discrete_ties_only_at_jumps():
    design = fx.SimulationDesign(n=6, beta_true=np.array([0.5]), baseline_rate=0.3,
                                 baseline_jumps=((0.8, 0.4),),
                                 censoring=fx.CensoringLaw("fixed", 3.0))
    saw_tie = False
    for r in range(600):
        d = fx.generate_discrete_dga(design, fx.substream(77, r))
        ft = d.y[d.delta == 1]
        vals, counts = np.unique(ft, return_counts=True)
        if np.any(counts > 1):
            saw_tie = True
            assert np.all(vals[counts > 1] == 0.8)
    assert saw_tie


def test_discrete_single_subject_tie_count_is_one():
    design = fx.SimulationDesign(n=1, beta_true=np.zeros(1), baseline_rate=0.0,
                                 baseline_jumps=((0.5, 0.7),),
                                 censoring=fx.CensoringLaw("fixed", 2.0))
    fails = 0
    for r in range(1500):
        d = fx.generate_discrete_dga(design, fx.substream(88, r))
        assert d.delta.sum() in (0, 1)
        if d.delta[0] == 1:
            assert d.y[0] == 0.5
            fails += 1
    # failure lands at the jump with probability 1 - exp(-0.7)
    assert fails / 1500 == pytest.approx(1 - np.exp(-0.7), abs=0.04)


def test_discrete_small_jumps_rarely_tie():
    design = fx.SimulationDesign(n=10, beta_true=np.array([0.3]), baseline_rate=1.0,
                                 baseline_jumps=tuple((0.1 * k, 0.001) for k in range(1, 15)),
                                 censoring=fx.CensoringLaw("fixed", 2.0))
    tied = 0
    for r in range(400):
        d = fx.generate_discrete_dga(design, fx.substream(99, r))
        _, counts = np.unique(d.y[d.delta == 1], return_counts=True)
        tied += int(np.any(counts > 1))
    assert tied <= 2


def test_discrete_requires_jumps():
    design = fx.SimulationDesign(n=5, beta_true=np.zeros(1))
    with pytest.raises(fx.ConfigError):
        fx.generate_discrete_dga(design, fx.substream(0))


def test_proposition_one_equivalence_small():
    # smaller-scale version of the acceptance run
    design = fx.SimulationDesign(n=3, beta_true=np.array([0.8]))
    xfix = np.array([[-0.5], [0.3], [1.1]])
    cens = np.array([0.7, 1.3, 2.0])
    reps = 4000

    def first_failure(d):
        fails = np.flatnonzero(d.delta == 1)
        if fails.size == 0:
            return None, None
        i = fails[np.argmin(d.y[fails])]
        return int(i), float(d.y[i])

    subj = {"a": [], "b": []}
    times = {"a": [], "b": []}
    for r in range(reps):
        da = fx.generate_sequential_dga(design, cens, fx.substream(100, r), covariates=xfix)
        db = fx.generate_standard(design, fx.substream(200, r),
                                  censoring_times=cens, covariates=xfix)
        for tag, d in (("a", da), ("b", db)):
            i, t = first_failure(d)
            if i is not None:
                subj[tag].append(i)
                times[tag].append(t)
    table = np.array([[subj["a"].count(j) for j in range(3)],
                      [subj["b"].count(j) for j in range(3)]])
    assert stats.chi2_contingency(table).pvalue > 0.01
    assert stats.ks_2samp(times["a"], times["b"]).pvalue > 0.01


def test_parse_scenarios_and_errors():
    raw = {
        "n": 10,
        "censoring": {"kind": "uniform", "value": 2.0},
        "scenarios": [{"name": "a", "beta_true": [0.5, 1.0]},
                      {"beta_true": [0.0, 0.0], "n": 12}],
    }
    scen = fx.parse_scenarios(raw)
    assert scen[0].name == "a" and scen[0].design.n == 10
    assert scen[1].design.n == 12
    with pytest.raises(fx.ConfigError):
        fx.parse_scenarios({"nope": 1})
    with pytest.raises(fx.ConfigError):
        fx.parse_scenarios({"scenarios": [{"name": "x"}]})
    with pytest.raises(fx.ConfigError):
        fx.parse_scenarios({"scenarios": [{"beta_true": [0.0], "mystery": 3}]})
    with pytest.raises(fx.ConfigError):
        fx.parse_scenarios({"scenarios": [{"beta_true": [0.0],
                                           "censoring": {"kind": "alien"}}]})


def test_study_rejects_zero_reps():
    with pytest.raises(fx.ConfigError, match="reps"):
        fx.StudyConfig(reps=0)
    scen = [fx.Scenario("a", fx.SimulationDesign(n=10, beta_true=np.zeros(2)))]
    with pytest.raises(fx.ConfigError):
        fx.run_simulation_study([], fx.StudyConfig(reps=1))


def test_study_smoke_and_thread_determinism():
    scen = [fx.Scenario("m3", fx.SimulationDesign(n=12, beta_true=np.array([0.5, 1.0])))]
    cfg1 = fx.StudyConfig(reps=4, n_mcmc=10, n_burn=2, seed=9, threads=1)
    cfg2 = fx.StudyConfig(reps=4, n_mcmc=10, n_burn=2, seed=9, threads=2)
    r1 = fx.run_simulation_study(scen, cfg1)
    r2 = fx.run_simulation_study(scen, cfg2)
    d1, d2 = r1.to_dict(), r2.to_dict()
    assert d1["scenarios"] == d2["scenarios"]
    res = r1.results[0]
    assert res.reps == 4
    assert res.fiducial_mse.shape == (2,)
    assert np.all(res.fiducial_ci_length > 0)
    assert 0.0 <= res.fiducial_coverage.min() <= 1.0
    table = r1.render_table()
    assert "Fiducial b1" in table and "MLE b2" in table
