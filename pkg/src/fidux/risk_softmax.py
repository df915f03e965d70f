"""Shared softmax statistics over nested at-risk sets.

Every likelihood and constraint evaluation in this package reduces to,
per distinct failure time t_k, the log-sum-exp of the linear scores
``X_j @ beta`` over the at-risk set ``R_k = {j : Y_j >= t_k}``, together
with the softmax-weighted mean and covariance of the covariates on R_k.
Because the R_k are nested (later failure times have smaller sets),
sorting subjects by observed time in decreasing order turns every R_k
into a prefix of the sorted sample, and a single pass of cumulative sums
yields all K statistics at once.
"""

from __future__ import annotations

import numpy as np


class RiskPrefix:
    """Precomputed prefix layout of a risk structure.

    Built once per dataset; ``stats`` is the hot path shared by the
    partial likelihood and by every constraint evaluation in the
    interior-point solver.
    """

    def __init__(self, risk) -> None:
        data = risk.data
        order = np.argsort(-data.y, kind="stable")
        self.xs = np.ascontiguousarray(data.x[order])
        ys = data.y[order]
        # risk set k is the prefix of length #{j : Y_j >= t_k}
        self.prefix_len = np.searchsorted(-ys, -risk.failure_times, side="right").astype(np.intp)
        self.x_outer = self.xs[:, :, None] * self.xs[:, None, :]
        self.x_fail = np.ascontiguousarray(data.x[risk.failing_order])
        self.kidx = np.asarray(risk.group_of_failure, dtype=np.intp)
        self.d_counts = np.array([len(g) for g in risk.tie_groups], dtype=float)
        self.x_group_sum = np.array([data.x[g].sum(axis=0) for g in risk.tie_groups])
        self.n, self.p = data.x.shape
        self.K = len(risk.failure_times)
        self.m = len(risk.failing_order)

    def stats(self, beta: np.ndarray, order: int = 2):
        """Log-sum-exp, softmax mean, and softmax covariance per risk set.

        Returns ``(lse, mean, cov)`` with shapes (K,), (K,p), (K,p,p);
        entries beyond the requested derivative order are None.  A global
        score shift keeps the exponentials overflow-safe.
        """
        s = self.xs @ beta
        shift = s.max()
        e = np.exp(s - shift)
        idx = self.prefix_len - 1
        denom = np.cumsum(e)[idx]
        lse = np.log(denom) + shift
        if order == 0:
            return lse, None, None
        m1 = np.cumsum(e[:, None] * self.xs, axis=0)[idx]
        mean = m1 / denom[:, None]
        if order == 1:
            return lse, mean, None
        m2 = np.cumsum(e[:, None, None] * self.x_outer, axis=0)[idx]
        cov = m2 / denom[:, None, None] - mean[:, None, :] * mean[:, :, None]
        return lse, mean, cov

    def constraint_values(self, beta: np.ndarray) -> np.ndarray:
        """Per-failure log softmax share: ``x_fail[h] @ beta - lse[k(h)]``."""
        lse, _, _ = self.stats(beta, order=0)
        return self.x_fail @ beta - lse[self.kidx]
