"""Forward data generation and the Monte Carlo study harness.

Three generators produce right-censored proportional-hazards data:

* ``generate_standard`` draws each subject's failure time by inverse CDF
  from its exponential rate and censors at an independent time;
* ``generate_sequential_dga`` builds the sample one failure at a time:
  the next failure time inverts the aggregated at-risk survival function
  and the failing subject is multinomial with softmax probabilities.
  The two constructions yield the same data law, which the test suite
  checks empirically;
* ``generate_discrete_dga`` allows jumps in the cumulative baseline
  hazard.  At a jump the number of simultaneous failures is Poisson
  (mean = jump size times the summed relative hazards) conditioned on
  being at least one and at most the at-risk count, and the tied set is
  multinomial conditioned on distinct subjects.

``run_simulation_study`` replicates generate/fit/summarize over scenario
definitions and aggregates MSE, confidence-interval length and coverage
for both the partial-likelihood MLE and the fiducial estimator, counting
MLE divergences separately.  Replications parallelize over processes
with independent seed substreams, so aggregates do not depend on the
worker count.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SurvivalDataset, build_risk_structure
from .errors import ConfigError, DataError, SolverError
from .gibbs import FiducialConfig, run_gibbs, summarize
from .partial_likelihood import newton_mle, wald_ci
from .rng import positive_uniform, substream
from .solver import SolverOptions


@dataclass(frozen=True)
class CensoringLaw:
    kind: str            # "uniform" on (0, value) or "fixed" horizon
    value: float

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "fixed"):
            raise ConfigError(f"unknown censoring kind {self.kind!r}")
        if not self.value > 0:
            raise ConfigError("censoring value must be positive")


@dataclass(frozen=True)
class CovariateLaw:
    kind: str            # "bernoulli" or "normal"
    prob: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("bernoulli", "normal"):
            raise ConfigError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "bernoulli" and not 0.0 < self.prob < 1.0:
            raise ConfigError("bernoulli probability must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class SimulationDesign:
    n: int
    beta_true: np.ndarray
    baseline_rate: float = 1.0
    baseline_jumps: tuple[tuple[float, float], ...] = ()   # (time, jump in Lambda0)
    censoring: CensoringLaw = CensoringLaw("uniform", 2.0)
    covariates: CovariateLaw = CovariateLaw("bernoulli", 0.5)
    seed: int = 0

    def __post_init__(self) -> None:
        beta = np.atleast_1d(np.asarray(self.beta_true, dtype=float))
        object.__setattr__(self, "beta_true", beta)
        if self.n < 1:
            raise ConfigError("sample size must be >= 1")
        if self.baseline_rate < 0 or (self.baseline_rate == 0 and not self.baseline_jumps):
            raise ConfigError("baseline rate must be positive (or zero with jumps)")
        times = [t for t, _ in self.baseline_jumps]
        if any(t <= 0 for t in times) or sorted(set(times)) != times:
            raise ConfigError("jump times must be positive and strictly increasing")
        if any(h <= 0 for _, h in self.baseline_jumps):
            raise ConfigError("jump sizes must be positive")

    @property
    def p(self) -> int:
        return self.beta_true.shape[0]


def _positive_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return u


def _draw_covariates(design: SimulationDesign, rng: np.random.Generator) -> np.ndarray:
    if design.covariates.kind == "bernoulli":
        return rng.binomial(1, design.covariates.prob, size=(design.n, design.p)).astype(float)
    return rng.standard_normal((design.n, design.p))


def _draw_censoring(design: SimulationDesign, rng: np.random.Generator) -> np.ndarray:
    if design.censoring.kind == "uniform":
        return design.censoring.value * _positive_uniforms(rng, design.n)
    return np.full(design.n, design.censoring.value)


def generate_standard(design: SimulationDesign, rng: np.random.Generator,
                      censoring_times: np.ndarray | None = None,
                      covariates: np.ndarray | None = None) -> SurvivalDataset:
    """Inverse-CDF generator for a constant-rate baseline.

    ``censoring_times`` and ``covariates`` fix those inputs instead of
    drawing them, for conditional law comparisons against the sequential
    generator.
    """
    if design.baseline_jumps:
        raise ConfigError("standard generator requires a constant-rate baseline")
    x = _draw_covariates(design, rng) if covariates is None else np.asarray(covariates, dtype=float)
    rate = design.baseline_rate * np.exp(x @ design.beta_true)
    t = -np.log(_positive_uniforms(rng, design.n)) / rate
    c = _draw_censoring(design, rng) if censoring_times is None else np.asarray(censoring_times, dtype=float)
    y = np.minimum(t, c)
    delta = (t <= c).astype(np.int64)
    return SurvivalDataset(x=x, y=y, delta=delta)


def generate_sequential_dga(design: SimulationDesign, censoring_times: np.ndarray,
                            rng: np.random.Generator,
                            covariates: np.ndarray | None = None) -> SurvivalDataset:
    """One-failure-at-a-time generator, conditional on fixed censoring times.

    Each step inverts the aggregated at-risk survival function for the
    next failure time (closed form for a constant-rate baseline, walking
    the censoring breakpoints where the aggregated rate drops) and picks
    the failing subject with softmax probabilities over the at-risk set.
    Stops when no failure occurs before all censorings, or no one is left.
    """
    if design.baseline_jumps:
        raise ConfigError("sequential generator requires a constant-rate baseline")
    c = np.asarray(censoring_times, dtype=float)
    if c.shape != (design.n,) or np.any(c <= 0):
        raise ConfigError("censoring_times must be n positive reals")
    x = _draw_covariates(design, rng) if covariates is None else np.asarray(covariates, dtype=float)
    hazard_w = design.baseline_rate * np.exp(x @ design.beta_true)

    y = np.empty(design.n)
    delta = np.zeros(design.n, dtype=np.int64)
    alive = set(range(design.n))
    t_prev = 0.0
    while alive:
        passed = [i for i in alive if c[i] <= t_prev]
        for i in passed:
            y[i] = c[i]
            alive.discard(i)
        if not alive:
            break
        target = -np.log(positive_uniform(rng))
        cur = sorted(alive)
        cursor = t_prev
        fail_time = None
        for bp in sorted({c[i] for i in cur}) + [np.inf]:
            if not cur:
                break
            rate = float(hazard_w[cur].sum())
            seg = rate * (bp - cursor) if np.isfinite(bp) else np.inf
            if target <= seg:
                fail_time = cursor + target / rate
                break
            target -= seg
            cursor = bp
            cur = [i for i in cur if c[i] > bp]
        if fail_time is None:
            for i in alive:
                y[i] = c[i]
            break
        probs = hazard_w[cur] / hazard_w[cur].sum()
        i_fail = int(np.asarray(cur)[rng.choice(len(cur), p=probs)])
        y[i_fail] = fail_time
        delta[i_fail] = 1
        alive.discard(i_fail)
        t_prev = fail_time
    return SurvivalDataset(x=x, y=y, delta=delta)


def sample_conditioned_poisson(eta: float, rng: np.random.Generator,
                               max_value: int | None = None) -> int:
    """Poisson(eta) conditioned on >= 1 (and <= max_value), by rejection."""
    if not eta > 0:
        raise ConfigError("eta must be positive")
    for _ in range(1_000_000):
        k = int(rng.poisson(eta))
        if k >= 1 and (max_value is None or k <= max_value):
            return k
    raise SolverError("conditioned Poisson rejection did not terminate")


def _distinct_multinomial(m_k: int, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """multinomial(m_k, probs) conditioned on no repeated category."""
    for _ in range(1_000_000):
        cats = rng.choice(probs.size, size=m_k, replace=True, p=probs)
        if np.unique(cats).size == m_k:
            return cats
    raise SolverError("distinct-category multinomial rejection did not terminate")


def generate_discrete_dga(design: SimulationDesign, rng: np.random.Generator) -> SurvivalDataset:
    """Generator for a cumulative baseline hazard with jumps (tied failures).

    Continuous segments behave exactly like the sequential generator.  At
    a jump of size h with at-risk set R, the aggregated hazard mass is
    eta = h * sum_R exp(beta @ X); conditional on a failure landing there
    the tie multiplicity is Poisson(eta) given >= 1 (redrawn when it
    exceeds |R|) and the tied subjects are multinomial without repeats.
    """
    if not design.baseline_jumps:
        raise ConfigError("discrete generator requires baseline jumps")
    x = _draw_covariates(design, rng)
    rel_w = np.exp(x @ design.beta_true)
    cont_w = design.baseline_rate * rel_w
    c = _draw_censoring(design, rng)
    jump_times = np.array([t for t, _ in design.baseline_jumps])
    jump_sizes = np.array([h for _, h in design.baseline_jumps])

    y = np.empty(design.n)
    delta = np.zeros(design.n, dtype=np.int64)
    alive = set(range(design.n))
    t_prev = 0.0
    while alive:
        passed = [i for i in alive if c[i] <= t_prev]
        for i in passed:
            y[i] = c[i]
            alive.discard(i)
        if not alive:
            break
        target = -np.log(positive_uniform(rng))
        cur = sorted(alive)
        cursor = t_prev
        bps = sorted({c[i] for i in cur} | {t for t in jump_times if t > t_prev})
        failed_at: float | None = None
        failed_set: list[int] = []
        for bp in bps + [np.inf]:
            if not cur:
                break
            rate = float(cont_w[cur].sum())
            seg = rate * (bp - cursor) if np.isfinite(bp) else np.inf
            if rate > 0 and target <= seg:
                failed_at = cursor + target / rate
                probs = rel_w[cur] / rel_w[cur].sum()
                failed_set = [int(np.asarray(cur)[rng.choice(len(cur), p=probs)])]
                break
            if np.isfinite(seg):
                target -= seg
            cursor = bp
            if np.isfinite(bp) and bp in jump_times:
                h = float(jump_sizes[jump_times == bp][0])
                eta = h * float(rel_w[cur].sum())
                if target <= eta:
                    m_k = sample_conditioned_poisson(eta, rng, max_value=len(cur))
                    probs = rel_w[cur] / rel_w[cur].sum()
                    cats = _distinct_multinomial(m_k, probs, rng)
                    failed_at = bp
                    failed_set = [int(np.asarray(cur)[j]) for j in cats]
                    break
                target -= eta
            cur = [i for i in cur if c[i] > bp]
        if failed_at is None:
            for i in alive:
                y[i] = c[i]
            break
        for i in failed_set:
            y[i] = failed_at
            delta[i] = 1
            alive.discard(i)
        t_prev = failed_at
    return SurvivalDataset(x=x, y=y, delta=delta)


# ---------------------------------------------------------------------------
# simulation study


@dataclass(frozen=True)
class Scenario:
    name: str
    design: SimulationDesign


@dataclass(frozen=True)
class StudyConfig:
    reps: int = 200
    n_mcmc: int = 400
    n_burn: int = 40
    alpha: float = 0.05
    seed: int = 0
    threads: int = 1
    box: float = 30.0
    solver: SolverOptions = SolverOptions()

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError("empty study: reps must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    name: str
    beta_true: np.ndarray
    reps: int
    fiducial_mse: np.ndarray
    fiducial_ci_length: np.ndarray
    fiducial_coverage: np.ndarray
    mle_n_divergent: int
    mle_mse_excluding_divergent: np.ndarray | None
    mle_mse_at_cap: np.ndarray
    mle_ci_length: np.ndarray | None
    mle_coverage: np.ndarray | None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "name": self.name,
            "beta_true": arr(self.beta_true),
            "reps": self.reps,
            "fiducial": {
                "mse": arr(self.fiducial_mse),
                "mean_ci_length": arr(self.fiducial_ci_length),
                "coverage": arr(self.fiducial_coverage),
            },
            "mle": {
                "n_divergent": self.mle_n_divergent,
                "mse_excluding_divergent": arr(self.mle_mse_excluding_divergent),
                "mse_at_cap": arr(self.mle_mse_at_cap),
                "mean_ci_length": arr(self.mle_ci_length),
                "coverage": arr(self.mle_coverage),
            },
        }


@dataclass(frozen=True, eq=False)
class StudyReport:
    results: tuple[ScenarioResult, ...]
    config: StudyConfig

    def to_dict(self) -> dict:
        return {
            "schema": "fidux-report/1",
            "kind": "study",
            "config": {
                "reps": self.config.reps,
                "n_mcmc": self.config.n_mcmc,
                "n_burn": self.config.n_burn,
                "alpha": self.config.alpha,
                "seed": self.config.seed,
                "box": self.config.box,
            },
            "scenarios": [r.to_dict() for r in self.results],
        }

    def render_table(self) -> str:
        lines = [
            f"{'Model':<34}{'Estimator':<16}{'MSE (x1e-2)':>12}{'Length of CI':>14}{'Coverage (%)':>14}"
        ]
        lines.append("-" * len(lines[0]))
        any_divergent = False
        for res in self.results:
            p = res.beta_true.shape[0]
            label = res.name + " (" + ", ".join(
                f"b{j + 1}={res.beta_true[j]:g}" for j in range(p)) + ")"
            for j in range(p):
                star = "*" if res.mle_n_divergent > 0 else ""
                any_divergent = any_divergent or bool(star)
                if res.mle_mse_excluding_divergent is None:
                    mle_cols = f"{'--':>12}{'--':>14}{'--':>14}"
                else:
                    mle_cols = (f"{100 * res.mle_mse_excluding_divergent[j]:>11.2f}{star:<1}"
                                f"{res.mle_ci_length[j]:>14.2f}"
                                f"{100 * res.mle_coverage[j]:>14.1f}")
                lines.append(f"{label if j == 0 else '':<34}{'MLE b' + str(j + 1):<16}" + mle_cols)
                lines.append(
                    f"{'':<34}{'Fiducial b' + str(j + 1):<16}"
                    f"{100 * res.fiducial_mse[j]:>11.2f} "
                    f"{res.fiducial_ci_length[j]:>14.2f}"
                    f"{100 * res.fiducial_coverage[j]:>14.1f}"
                )
        if any_divergent:
            lines.append("* MLE diverged in some replications; those runs are excluded "
                         "from the MLE aggregates (see mse_at_cap in the JSON report).")
        return "\n".join(lines)


def _replication(scenario_index: int, rep: int, scenario: Scenario,
                 study: StudyConfig) -> dict:
    design = scenario.design
    dataset = generate_standard(design, substream(study.seed, scenario_index, rep, 0))
    attempt = 1
    while dataset.m == 0:
        # all-censored sample carries no failures; redraw deterministically
        dataset = generate_standard(design, substream(study.seed, scenario_index, rep, 0, attempt))
        attempt += 1
    risk = build_risk_structure(dataset)
    mle = newton_mle(risk)
    cfg = FiducialConfig(n_mcmc=study.n_mcmc, n_burn=study.n_burn, seed=0,
                         alpha=study.alpha, box=study.box, solver=study.solver)
    samples = run_gibbs(risk, cfg, mle=mle, rng=substream(study.seed, scenario_index, rep, 1))
    summ = summarize(samples, study.alpha)
    ci = wald_ci(mle, study.alpha)
    return {
        "fid_point": summ.point_estimate,
        "fid_lo": summ.ci_lower,
        "fid_hi": summ.ci_upper,
        "mle_converged": mle.converged,
        "mle_est": mle.beta_hat,
        "mle_lo": None if ci is None else ci[0],
        "mle_hi": None if ci is None else ci[1],
    }


def _replication_task(args) -> tuple[int, int, dict]:
    scenario_index, rep, scenario, study = args
    return scenario_index, rep, _replication(scenario_index, rep, scenario, study)


def run_simulation_study(scenarios: list[Scenario], config: StudyConfig,
                         progress=None) -> StudyReport:
    """Replicate generate/fit/summarize per scenario and aggregate.

    Divergent-MLE replications are excluded from the MLE MSE, length and
    coverage aggregates but counted, and the at-cap estimates (the last
    Newton iterate) are additionally aggregated over all replications.
    """
    if not scenarios:
        raise ConfigError("empty study: no scenarios")
    tasks = [(si, r, scen, config)
             for si, scen in enumerate(scenarios) for r in range(config.reps)]
    results: dict[tuple[int, int], dict] = {}
    done = 0
    if config.threads == 1:
        for task in tasks:
            si, r, out = _replication_task(task)
            results[(si, r)] = out
            done += 1
            if progress:
                progress(scenarios[si].name, done, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for si, r, out in pool.map(_replication_task, tasks, chunksize=4):
                results[(si, r)] = out
                done += 1
                if progress:
                    progress(scenarios[si].name, done, len(tasks))

    scenario_results = []
    for si, scen in enumerate(scenarios):
        reps = [results[(si, r)] for r in range(config.reps)]
        beta0 = scen.design.beta_true
        fid_point = np.array([r["fid_point"] for r in reps])
        fid_lo = np.array([r["fid_lo"] for r in reps])
        fid_hi = np.array([r["fid_hi"] for r in reps])
        mle_est = np.array([r["mle_est"] for r in reps])
        conv = np.array([r["mle_converged"] for r in reps])

        fid_mse = ((fid_point - beta0) ** 2).mean(axis=0)
        fid_len = (fid_hi - fid_lo).mean(axis=0)
        fid_cov = ((fid_lo <= beta0) & (beta0 <= fid_hi)).mean(axis=0)
        mle_at_cap = ((mle_est - beta0) ** 2).mean(axis=0)
        if conv.any():
            sub = np.flatnonzero(conv)
            mle_mse = ((mle_est[sub] - beta0) ** 2).mean(axis=0)
            lo = np.array([reps[i]["mle_lo"] for i in sub])
            hi = np.array([reps[i]["mle_hi"] for i in sub])
            mle_len = (hi - lo).mean(axis=0)
            mle_cov = ((lo <= beta0) & (beta0 <= hi)).mean(axis=0)
        else:
            mle_mse = mle_len = mle_cov = None
        scenario_results.append(ScenarioResult(
            name=scen.name,
            beta_true=beta0,
            reps=config.reps,
            fiducial_mse=fid_mse,
            fiducial_ci_length=fid_len,
            fiducial_coverage=fid_cov,
            mle_n_divergent=int((~conv).sum()),
            mle_mse_excluding_divergent=mle_mse,
            mle_mse_at_cap=mle_at_cap,
            mle_ci_length=mle_len,
            mle_coverage=mle_cov,
        ))
    return StudyReport(results=tuple(scenario_results), config=config)


# ---------------------------------------------------------------------------
# scenario files


def parse_scenarios(raw: dict) -> list[Scenario]:
    """Build scenario designs from a declarative key-value document."""
    if not isinstance(raw, dict) or "scenarios" not in raw:
        raise ConfigError("scenario file must contain a 'scenarios' list")
    defaults = {k: v for k, v in raw.items() if k != "scenarios"}
    out = []
    for i, entry in enumerate(raw["scenarios"]):
        if "beta_true" not in entry:
            raise ConfigError(f"scenario {i}: missing beta_true")
        merged = {**defaults, **entry}
        name = merged.pop("name", f"scenario{i + 1}")
        try:
            design = SimulationDesign(
                n=int(merged.pop("n", 20)),
                beta_true=np.asarray(merged.pop("beta_true"), dtype=float),
                baseline_rate=float(merged.pop("baseline_rate", 1.0)),
                baseline_jumps=tuple(
                    (float(t), float(h)) for t, h in merged.pop("baseline_jumps", [])
                ),
                censoring=_parse_censoring(merged.pop("censoring", {"kind": "uniform", "value": 2.0})),
                covariates=_parse_covariates(merged.pop("covariates", {"kind": "bernoulli", "prob": 0.5})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario {i}: {exc}") from exc
        if merged:
            raise ConfigError(f"scenario {i}: unknown keys {sorted(merged)}")
        out.append(Scenario(name=name, design=design))
    return out


def _parse_censoring(raw: dict) -> CensoringLaw:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("censoring must be an object with a 'kind'")
    return CensoringLaw(kind=raw["kind"], value=float(raw.get("value", 2.0)))


def _parse_covariates(raw: dict) -> CovariateLaw:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("covariates must be an object with a 'kind'")
    return CovariateLaw(kind=raw["kind"], prob=float(raw.get("prob", 0.5)))
