"""Piecewise-constant baseline-hazard sampling given a log-hazard-ratio draw.

The hazard is constant on the intervals between consecutive distinct
failure times (plus one open interval beyond the last).  Interval k has
exposure

    l_k = sum_i (min(t_k, Y_i) - min(t_{k-1}, Y_i)) * exp(beta @ X_i)

and its rate is drawn as Exponential with rate parameter l_k (mean 1/l_k),
via the inverse CDF -log(W)/l_k so the driving uniforms are recoverable in
tests.  The last interval carries only partial information and uses the
rate max(l_K, 2 * l_{K+1}).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import RiskStructure, SurvivalDataset
from .errors import DataError
from .rng import positive_uniform


@dataclass(frozen=True, eq=False)
class BaselineHazardSample:
    """One draw of the piecewise-constant baseline hazard.

    ``knots`` is [0, t_1, ..., t_K]; ``rates[k]`` applies on
    (knots[k], knots[k+1]], with ``rates[-1]`` extending beyond t_K.
    Evaluation past ``max_observed_time`` is extrapolation unsupported by
    the data and triggers a warning.
    """

    knots: np.ndarray        # (K+1,)
    rates: np.ndarray        # (K+1,)
    exposures: np.ndarray    # (K+1,)
    max_observed_time: float

    def cumulative(self, t) -> np.ndarray | float:
        return cumulative_hazard(self, t)

    def save_csv(self, path) -> None:
        knots = np.concatenate([self.knots, [np.inf]])
        rows = np.column_stack([knots[1:], self.rates])
        np.savetxt(path, rows, delimiter=",", header="interval_end,rate", comments="")


def compute_exposures(risk: RiskStructure, data: SurvivalDataset,
                      beta_star: np.ndarray) -> np.ndarray:
    """Per-interval hazard exposures l_1..l_{K+1} at the given beta draw."""
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_star.shape != (data.p,) or not np.all(np.isfinite(beta_star)):
        raise DataError("beta_star must be a finite vector of length p")
    weights = np.exp(data.x @ beta_star)
    knots = np.concatenate([[0.0], risk.failure_times])
    y = data.y
    out = np.empty(knots.size)
    for k in range(1, knots.size):
        out[k - 1] = float(np.sum((np.minimum(knots[k], y) - np.minimum(knots[k - 1], y)) * weights))
    out[-1] = float(np.sum(np.clip(y - knots[-1], 0.0, None) * weights))
    return out


def last_interval_rate(exposures: np.ndarray) -> float:
    """Rate parameter for the interval beyond the last failure time."""
    return float(max(exposures[-2], 2.0 * exposures[-1]))


def sample_baseline(risk: RiskStructure, data: SurvivalDataset,
                    beta_star: np.ndarray, rng: np.random.Generator) -> BaselineHazardSample:
    """Draw interval rates as Exponentials with the exposure rates."""
    exposures = compute_exposures(risk, data, beta_star)
    rate_params = exposures.copy()
    rate_params[-1] = last_interval_rate(exposures)
    rates = np.array([-np.log(positive_uniform(rng)) / r for r in rate_params])
    knots = np.concatenate([[0.0], risk.failure_times])
    return BaselineHazardSample(
        knots=knots,
        rates=rates,
        exposures=exposures,
        max_observed_time=float(data.y.max()),
    )


def cumulative_hazard(sample: BaselineHazardSample, t) -> np.ndarray | float:
    """Integral of the piecewise-constant hazard from 0 to t (t >= 0)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DataError("time must be nonnegative")
    if np.any(t_arr > sample.max_observed_time):
        warnings.warn(
            "cumulative hazard beyond the last observed time: "
            "extrapolation unsupported by the data",
            stacklevel=2,
        )
    knots = sample.knots
    lengths = np.diff(knots)
    scalar = t_arr.ndim == 0
    tt = np.atleast_1d(t_arr)
    overlaps = np.clip(tt[:, None] - knots[None, :-1], 0.0, lengths[None, :])
    acc = overlaps @ sample.rates[:-1]
    acc += np.clip(tt - knots[-1], 0.0, None) * sample.rates[-1]
    return float(acc[0]) if scalar else acc
