"""Breslow log partial likelihood, its derivatives, and the Newton MLE.

With distinct failure times t_1 < ... < t_K, tie groups d_k, and risk
sets R_k, the Breslow form is

    l(beta) = sum_k [ beta @ sum_{i in d_k} X_i - |d_k| * lse_k(beta) ],
    lse_k(beta) = log sum_{j in R_k} exp(beta @ X_j),

with score sum_k [ sum_{d_k} X_i - |d_k| g_k ] and observed information
sum_k |d_k| V_k, where g_k and V_k are the softmax mean and covariance of
the covariates on R_k.  The likelihood is concave; it is constant along a
direction v exactly when v @ X_j is constant within every risk set
(non-identifiable), and it can increase without bound along a direction
(monotone likelihood), in which case the MLE diverges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.optimize import linprog

from .data import RiskStructure
from .errors import DataError


@dataclass(frozen=True)
class NewtonOptions:
    gtol: float = 1e-8
    max_iter: int = 100
    divergence_bound: float = 30.0     # on the max-norm scale of beta


@dataclass(frozen=True, eq=False)
class MleResult:
    """Outcome of the Newton maximization.

    ``converged`` implies the gradient norm is below tolerance and
    ``neg_hessian_inverse`` (the Wald covariance estimate) is present and
    positive definite.  ``divergence_reason`` is one of ``monotone``,
    ``non_identifiable``, ``iteration_limit`` when not converged;
    ``beta_hat`` then holds the last iterate (the at-cap estimate).
    """

    beta_hat: np.ndarray
    converged: bool
    log_pl: float
    neg_hessian_inverse: np.ndarray | None
    iterations: int
    divergence_reason: str | None = None


def _value_grad_hess(beta: np.ndarray, risk: RiskStructure):
    pre = risk.prefix
    lse, mean, cov = pre.stats(beta, order=2)
    value = float((pre.x_group_sum @ beta - pre.d_counts * lse).sum())
    grad = (pre.x_group_sum - pre.d_counts[:, None] * mean).sum(axis=0)
    hess = -np.tensordot(pre.d_counts, cov, axes=1)
    return value, grad, hess


def log_partial_likelihood(beta: np.ndarray, risk: RiskStructure) -> float:
    """Overflow-safe Breslow log partial likelihood."""
    beta = _check_beta(beta, risk)
    pre = risk.prefix
    lse, _, _ = pre.stats(beta, order=0)
    return float((pre.x_group_sum @ beta - pre.d_counts * lse).sum())


def gradient(beta: np.ndarray, risk: RiskStructure) -> np.ndarray:
    """Analytic score vector of the Breslow log partial likelihood."""
    beta = _check_beta(beta, risk)
    pre = risk.prefix
    _, mean, _ = pre.stats(beta, order=1)
    return (pre.x_group_sum - pre.d_counts[:, None] * mean).sum(axis=0)


def hessian(beta: np.ndarray, risk: RiskStructure) -> np.ndarray:
    """Analytic Hessian; symmetric negative semidefinite."""
    beta = _check_beta(beta, risk)
    pre = risk.prefix
    _, _, cov = pre.stats(beta, order=2)
    return -np.tensordot(pre.d_counts, cov, axes=1)


def _check_beta(beta, risk) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (risk.data.p,):
        raise DataError(f"beta has length {beta.shape[0]}, expected {risk.data.p}")
    return beta


def constancy_scatter(risk: RiskStructure) -> np.ndarray:
    """Pooled within-risk-set covariate scatter.

    Its null space consists of the directions along which the partial
    likelihood is constant; a singular scatter means non-identifiable.
    """
    x = risk.data.x
    a = np.zeros((risk.data.p, risk.data.p))
    for rs in risk.risk_sets:
        xc = x[rs] - x[rs].mean(axis=0)
        a += xc.T @ xc
    return a


def _is_identifiable(risk: RiskStructure) -> bool:
    eig = np.linalg.eigvalsh(constancy_scatter(risk))
    return bool(eig[0] > 1e-10 * max(1.0, eig[-1]))


def has_monotone_direction(risk: RiskStructure) -> bool:
    """Exact test for a diverging (monotone) partial likelihood.

    The likelihood supremum is unattained exactly when some direction v
    has ``v @ X_i >= v @ X_j`` for every failure i and every j in its
    risk set, strictly for at least one pair: the likelihood is then
    nondecreasing along v and increases somewhere.  Feasibility of that
    cone with a strict pair is a small linear program.
    """
    x = risk.data.x
    diffs = []
    for k, group in enumerate(risk.tie_groups):
        rs = risk.risk_sets[k]
        for i in group:
            d = x[i] - x[rs]
            diffs.append(d)
    diffs = np.unique(np.vstack(diffs), axis=0)
    diffs = diffs[np.any(diffs != 0.0, axis=1)]
    if diffs.size == 0:
        return False
    res = linprog(
        c=-diffs.sum(axis=0),
        A_ub=-diffs,
        b_ub=np.zeros(diffs.shape[0]),
        bounds=[(-1.0, 1.0)] * risk.data.p,
        method="highs",
    )
    if not res.success:
        return False
    return bool(-res.fun > 1e-9)


def newton_mle(risk: RiskStructure, options: NewtonOptions | None = None) -> MleResult:
    """Damped Newton maximization from beta = 0 with divergence detection.

    Divergence is flagged when the iterate's max-norm crosses
    ``divergence_bound`` (monotone likelihood), or at the iteration cap
    with the likelihood still strictly increasing.  A constant partial
    likelihood is reported separately as ``non_identifiable``.
    """
    opts = options or NewtonOptions()
    p = risk.data.p
    beta = np.zeros(p)
    if not _is_identifiable(risk):
        return MleResult(beta, False, log_partial_likelihood(beta, risk), None, 0,
                         "non_identifiable")
    monotone = has_monotone_direction(risk)
    value, grad, hess = _value_grad_hess(beta, risk)
    increased = False
    for it in range(1, opts.max_iter + 1):
        if np.linalg.norm(grad, np.inf) <= opts.gtol:
            if monotone:
                # gradient flattens as the softmax saturates, but the
                # supremum sits at infinity; keep the at-cap iterate
                return MleResult(beta, False, value, None, it - 1, "monotone")
            return _converged_result(beta, value, hess, it - 1)
        step_dir = _ascent_direction(grad, hess)
        gd = float(grad @ step_dir)
        step = 1.0
        while True:
            cand = beta + step * step_dir
            cand_val = log_partial_likelihood(cand, risk)
            if cand_val >= value + 1e-4 * step * gd:
                break
            step *= 0.5
            if step < 1e-12:
                return MleResult(beta, False, value, None, it, "iteration_limit")
        increased = cand_val > value
        beta = cand
        value, grad, hess = _value_grad_hess(beta, risk)
        if np.linalg.norm(beta, np.inf) > opts.divergence_bound:
            return MleResult(beta, False, value, None, it, "monotone")
    reason = "monotone" if (increased and np.linalg.norm(grad, np.inf) > opts.gtol) else "iteration_limit"
    return MleResult(beta, False, value, None, opts.max_iter, reason)


def _ascent_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    neg_h = -hess
    try:
        d = np.linalg.solve(neg_h, grad)
    except np.linalg.LinAlgError:
        d = None
    if d is None or not np.all(np.isfinite(d)) or float(grad @ d) <= 0:
        jitter = 1e-10 * max(1.0, float(np.trace(neg_h)) / neg_h.shape[0])
        d = np.linalg.solve(neg_h + jitter * np.eye(neg_h.shape[0]), grad)
    return d


def _converged_result(beta, value, hess, iterations) -> MleResult:
    neg_h = -hess
    try:
        np.linalg.cholesky(neg_h)
        cov = np.linalg.inv(neg_h)
    except np.linalg.LinAlgError:
        return MleResult(beta, False, value, None, iterations, "iteration_limit")
    return MleResult(beta, True, value, cov, iterations, None)


def ridge_mle(risk: RiskStructure, penalty: float = 1e-2,
              gtol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Maximizer of the log partial likelihood minus ``penalty * ||beta||^2``.

    Strictly concave, so it exists and is unique even for monotone or
    non-identifiable likelihoods; used as the chain-start fallback.
    """
    p = risk.data.p
    beta = np.zeros(p)
    for _ in range(max_iter):
        value, grad, hess = _value_grad_hess(beta, risk)
        grad = grad - 2.0 * penalty * beta
        if np.linalg.norm(grad, np.inf) <= gtol:
            break
        neg_h = -(hess - 2.0 * penalty * np.eye(p))
        d = np.linalg.solve(neg_h, grad)
        gd = float(grad @ d)
        obj = value - penalty * float(beta @ beta)
        step = 1.0
        while step >= 1e-14:
            cand = beta + step * d
            cand_obj = log_partial_likelihood(cand, risk) - penalty * float(cand @ cand)
            if cand_obj >= obj + 1e-4 * step * gd:
                break
            step *= 0.5
        beta = beta + step * d
    return beta


def wald_ci(result: MleResult, alpha: float = 0.05):
    """Normal-theory interval from the inverse observed information.

    Returns ``(lower, upper)`` arrays, or None when the MLE diverged.
    """
    if not result.converged or result.neg_hessian_inverse is None:
        return None
    z = sps.norm.ppf(1.0 - alpha / 2.0)
    se = np.sqrt(np.diag(result.neg_hessian_inverse))
    return result.beta_hat - z * se, result.beta_hat + z * se
