"""Fiducial Gibbs sampler for the log hazard ratio.

One sweep cycles over the m inverted-inequality bounds: for each k, the
conditional upper bound q_k* comes from a constrained maximization of
failure k's softmax share given the other bounds, and U_k is redrawn
uniformly on (0, q_k*).  After the full cycle a representative beta is
selected by maximizing beta @ w for a standard normal direction w over
the feasible set.  Chain state stays strictly feasible throughout, since
every stored point is an interior-point iterate.

For a single covariate the sampler's target has a closed unnormalized
density: the partial likelihood times a sum over failures of
|dp_i/dbeta| / (p_i c_i), where p_i is the subject's softmax share and
c_i its total range over beta (censored subjects contribute range 1).
That density is used as a validation oracle via a Kolmogorov-Smirnov
distance between chain draws and the grid-normalized CDF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .data import RiskStructure
from .errors import DataError, DegenerateDensityError, SolverError
from .partial_likelihood import MleResult, newton_mle, ridge_mle
from .rng import positive_uniform, substream
from .solver import (FeasibilityProblem, SolverOptions, check_feasible,
                     solve_qk_star, solve_representative)


@dataclass(frozen=True)
class FiducialConfig:
    n_mcmc: int = 400
    n_burn: int = 40
    seed: int = 0
    alpha: float = 0.05
    box: float = 30.0
    solver: SolverOptions = SolverOptions()

    def __post_init__(self) -> None:
        if self.n_mcmc < 1:
            raise DataError("n_mcmc must be >= 1")
        if self.n_burn < 0:
            raise DataError("n_burn must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise DataError("alpha must be in (0, 1)")
        if not self.box > 0:
            raise DataError("box bound must be positive")


@dataclass(frozen=True, eq=False)
class GibbsState:
    u_star: np.ndarray        # (m,) in (0, 1)
    beta_current: np.ndarray  # feasible representative


@dataclass(frozen=True, eq=False)
class FiducialSamples:
    """Post burn-in draws with chain diagnostics."""

    draws: np.ndarray              # (n_mcmc, p)
    ess: np.ndarray                # (p,) effective sample sizes
    box_active_count: int

    def save_csv(self, path) -> None:
        header = ",".join(f"beta_{j + 1}" for j in range(self.draws.shape[1]))
        np.savetxt(path, self.draws, delimiter=",", header=header, comments="")


@dataclass(frozen=True, eq=False)
class FiducialSummary:
    point_estimate: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float

    def to_dict(self) -> dict:
        return {
            "point_estimate": self.point_estimate.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
            "alpha": self.alpha,
        }


def init_chain(risk: RiskStructure, mle: MleResult, config: FiducialConfig,
               rng: np.random.Generator | None = None) -> GibbsState:
    """Start the chain at the (possibly ridge-stabilized) likelihood maximizer.

    U_k is drawn uniformly on (0, q_k(beta_ref)), so the initial state is
    feasible by construction.  When the MLE diverged or the likelihood is
    non-identifiable, beta_ref is the ridge-penalized maximizer, which
    always exists.
    """
    rng = substream(config.seed) if rng is None else rng
    beta_ref = mle.beta_hat if mle.converged else ridge_mle(risk)
    cap = config.box * (1.0 - 1e-6)
    beta_ref = np.clip(np.asarray(beta_ref, dtype=float), -cap, cap)
    log_q = risk.prefix.constraint_values(beta_ref)
    u_frac = rng.random(risk.m)
    while np.any(u_frac == 0.0):
        zero = u_frac == 0.0
        u_frac[zero] = rng.random(int(zero.sum()))
    log_u = log_q + np.log(u_frac)
    return GibbsState(u_star=np.exp(log_u), beta_current=beta_ref)


def gibbs_sweep(state: GibbsState, risk: RiskStructure, config: FiducialConfig,
                rng: np.random.Generator) -> GibbsState:
    """One full cycle: update every U_k in order, then draw a representative."""
    u = state.u_star.copy()
    log_u = np.log(u)
    beta = state.beta_current
    for k in range(risk.m):
        problem = FeasibilityProblem(risk, log_u, config.box)
        report = _checked_solve(solve_qk_star, problem, k, beta, config.solver,
                                stage=f"bound update k={k}", state=state)
        log_q = report.objective          # log q_k*, clamped <= 0
        log_u[k] = log_q + np.log(positive_uniform(rng))
        u[k] = np.exp(log_u[k])
        beta = report.argmax
    w = rng.standard_normal(risk.data.p)
    problem = FeasibilityProblem(risk, log_u, config.box)
    report = _checked_solve(solve_representative, problem, w, beta, config.solver,
                            stage="representative", state=state)
    return GibbsState(u_star=u, beta_current=report.argmax)


def _checked_solve(fn, problem, arg, warm, opts, stage, state):
    try:
        report = fn(problem, arg, warm_start=warm, options=opts)
    except SolverError as exc:
        raise SolverError(
            f"solver failure at {stage}: {exc}; u_star={state.u_star!r}, "
            f"beta={state.beta_current!r}"
        ) from exc
    if report.status == "infeasible":
        raise SolverError(
            f"internal-logic failure: infeasible system at {stage}; "
            f"u_star={state.u_star!r}, beta={state.beta_current!r}"
        )
    return report


def run_gibbs(risk: RiskStructure, config: FiducialConfig,
              mle: MleResult | None = None,
              rng: np.random.Generator | None = None) -> FiducialSamples:
    """Run burn-in plus retained sweeps and collect the representatives."""
    rng = substream(config.seed) if rng is None else rng
    mle = newton_mle(risk) if mle is None else mle
    state = init_chain(risk, mle, config, rng)
    p = risk.data.p
    draws = np.empty((config.n_mcmc, p))
    for j in range(config.n_burn + config.n_mcmc):
        state = gibbs_sweep(state, risk, config, rng)
        if j >= config.n_burn:
            draws[j - config.n_burn] = state.beta_current
            problem = FeasibilityProblem(risk, np.log(state.u_star), config.box)
            ok, viol = check_feasible(state.beta_current, problem, config.solver.feas_tol)
            if not ok:
                raise SolverError(f"sweep {j}: stored draw violates constraints by {viol:g}")
    box_edge = config.box - 1e-4 * (1.0 + config.box)
    box_active = int((np.abs(draws).max(axis=1) >= box_edge).sum())
    return FiducialSamples(draws=draws, ess=effective_sample_size(draws),
                           box_active_count=box_active)


def summarize(samples: FiducialSamples | np.ndarray, alpha: float = 0.05) -> FiducialSummary:
    """Per-coordinate median and linear-interpolation (type-7) quantile CI."""
    draws = samples.draws if isinstance(samples, FiducialSamples) else np.asarray(samples, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.size == 0:
        raise DataError("no draws to summarize")
    lo, med, hi = np.quantile(draws, [alpha / 2.0, 0.5, 1.0 - alpha / 2.0], axis=0)
    return FiducialSummary(point_estimate=med, ci_lower=lo, ci_upper=hi, alpha=alpha)


def effective_sample_size(draws: np.ndarray) -> np.ndarray:
    """Autocorrelation-based ESS per coordinate (initial positive sequence)."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    out = []
    for col in draws.T:
        n = col.size
        a = col - col.mean()
        denom = float(a @ a)
        if denom == 0.0 or n < 4:
            out.append(float(n))
            continue
        acov = np.correlate(a, a, "full")[n - 1:] / n
        rho = acov / acov[0]
        tau = 1.0
        for k in range(1, n // 2):
            pair = rho[2 * k - 1] + rho[2 * k]
            if pair < 0:
                break
            tau += 2.0 * pair
        out.append(float(min(n, max(1.0, n / tau))))
    return np.array(out)


# ---------------------------------------------------------------------------
# single-covariate density oracle


class _Density1D:
    """Unnormalized single-covariate target density of the sampler."""

    def __init__(self, risk: RiskStructure, box: float):
        if risk.data.p != 1:
            raise DataError("density oracle requires a single covariate")
        self.risk = risk
        self.box = float(box)
        x = risk.data.x[:, 0]
        self.ranges = np.empty(risk.m)
        for h in range(risk.m):
            k = int(risk.group_of_failure[h])
            xr = x[risk.risk_sets[k]]
            xi = x[risk.failing_order[h]]
            if xr.max() == xr.min():
                raise DegenerateDensityError(
                    f"all covariates equal within the risk set of failure {h}; "
                    "density is identically zero"
                )
            self.ranges[h] = self._share_range(xi, xr)

    def _share(self, beta: float, xi: float, xr: np.ndarray) -> float:
        return float(np.exp(beta * xi - logsumexp(beta * xr)))

    def _share_range(self, xi: float, xr: np.ndarray) -> float:
        # softmax share limits as beta -> +/- inf land on argmax/argmin sets
        hi_lim = 1.0 / np.sum(xr == xr.max()) if xi == xr.max() else 0.0
        lo_lim = 1.0 / np.sum(xr == xr.min()) if xi == xr.min() else 0.0
        res_max = minimize_scalar(lambda b: -self._share(b, xi, xr),
                                  bounds=(-self.box, self.box), method="bounded")
        res_min = minimize_scalar(lambda b: self._share(b, xi, xr),
                                  bounds=(-self.box, self.box), method="bounded")
        sup = max(-res_max.fun, hi_lim, lo_lim)
        inf = min(res_min.fun, hi_lim, lo_lim)
        return sup - inf

    def __call__(self, beta: float) -> float:
        b = np.atleast_1d(float(beta))
        pre = self.risk.prefix
        lse, mean, _ = pre.stats(b, order=1)
        f = pre.x_fail @ b - lse[pre.kidx]
        shares = np.exp(f)
        slopes = shares * (pre.x_fail[:, 0] - mean[pre.kidx, 0])
        return float(np.exp(f.sum()) * np.sum(np.abs(slopes) / (shares * self.ranges)))


@lru_cache(maxsize=8)
def _density_oracle(risk: RiskStructure, box: float) -> _Density1D:
    return _Density1D(risk, box)


def fiducial_density_1d(beta: float, risk: RiskStructure, box: float = 30.0) -> float:
    """Unnormalized sampler target density at ``beta`` for p = 1 data."""
    return _density_oracle(risk, float(box))(beta)


def failure_shares_and_slopes(beta: float, risk: RiskStructure):
    """Per-failure softmax share p_h and its derivative in beta (p = 1)."""
    if risk.data.p != 1:
        raise DataError("requires a single covariate")
    b = np.atleast_1d(float(beta))
    pre = risk.prefix
    lse, mean, _ = pre.stats(b, order=1)
    shares = np.exp(pre.x_fail @ b - lse[pre.kidx])
    slopes = shares * (pre.x_fail[:, 0] - mean[pre.kidx, 0])
    return shares, slopes


def density_grid(risk: RiskStructure, box: float = 30.0, n_points: int = 2001):
    """Trapezoid-normalized density on an even grid over [-box, box].

    Returns ``(grid, pdf, cdf)`` with cdf[0] = 0 and cdf[-1] = 1.
    """
    oracle = _density_oracle(risk, float(box))
    grid = np.linspace(-box, box, n_points)
    vals = np.array([oracle(b) for b in grid])
    scale = vals.max()
    if scale <= 0:
        raise DegenerateDensityError("density is identically zero on the grid")
    vals = vals / scale
    dx = grid[1] - grid[0]
    cdf = np.concatenate([[0.0], np.cumsum((vals[1:] + vals[:-1]) * 0.5 * dx)])
    total = cdf[-1]
    cdf = cdf / total
    return grid, vals / total, cdf


def ks_distance(draws: np.ndarray, risk: RiskStructure, box: float = 30.0,
                n_points: int = 2001) -> float:
    """KS distance between draws and the grid-normalized density CDF."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size == 0:
        raise DataError("no draws")
    grid, _, cdf = density_grid(risk, box, n_points)
    xs = np.sort(draws)
    f = np.interp(xs, grid, cdf)
    n = xs.size
    upper = np.abs(np.arange(1, n + 1) / n - f)
    lower = np.abs(np.arange(0, n) / n - f)
    return float(max(upper.max(), lower.max()))
