"""Interior-point solves for the fiducial Gibbs sweep.

Both programs maximize a concave objective over the convex set

    c_h(beta) = beta @ x_fail[h] - lse_{R(h)}(beta) - log_u[h] >= 0,
    |beta_j| <= B,                                  h = 1..m,

where lse_R(beta) = log sum_{j in R} exp(beta @ X_j) over the risk set
shared by the h-th failure's tie group.  Each such constraint is
exponential-cone representable (introduce s with lse_R(beta) <= s via
t_j >= exp(beta @ X_j - s), sum_j t_j <= 1), which is how the constraint
evaluator is organized: one shared prefix pass produces every risk-set
log-sum-exp with its softmax mean and covariance, i.e. the values,
gradients and curvatures of all m constraints at once.

The solver itself is a log-barrier path-following method on the smooth
form: damped Newton minimization of

    phi_t(beta) = -t * f0(beta) - sum_h log c_h(beta)
                  - sum_j [log(B - beta_j) + log(B + beta_j)]

with t growing geometrically (factor ``mu``) until the duality-gap bound
(#constraints)/t falls below ``gap_tol``.  The two objectives are

* ``solve_qk_star``:  f0 = log softmax share of failure k, with
  constraint k excluded from the barrier (its bound is being resampled);
* ``solve_representative``:  f0 = beta @ w for a random direction w.

Iterates are strictly feasible throughout, so any returned point
satisfies every constraint with positive slack.  The box keeps both
programs well-posed (the support-function objective is otherwise
unbounded whenever the feasible set is); ``status`` reports when it
binds.  Without a warm start, a max-min-slack phase (same machinery, one
extra epigraph variable) finds a strictly feasible point or certifies
infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ._kernels import HAS_NUMBA, MODE_LINEAR, MODE_SHARE, barrier_eval
from .data import RiskStructure
from .errors import DataError, SolverError

Status = Literal["optimal", "box_active", "infeasible"]


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-8
    mu: float = 5.0            # barrier growth factor per outer stage
    t_init: float = 1.0
    center_tol: float = 1e-10  # Newton decrement^2 / 2
    max_newton: int = 80       # per centering stage
    armijo: float = 1e-4


@dataclass(frozen=True, eq=False)
class FeasibilityProblem:
    """Log-sum-exp constraint system in beta for one vector of log bounds."""

    risk: RiskStructure
    log_u: np.ndarray          # (m,), entries <= 0
    box: float = 30.0

    def __post_init__(self) -> None:
        log_u = np.asarray(self.log_u, dtype=float)
        object.__setattr__(self, "log_u", log_u)
        if log_u.shape != (self.risk.m,):
            raise DataError(f"log_u has length {log_u.shape}, expected ({self.risk.m},)")
        if not np.all(np.isfinite(log_u)) or np.any(log_u > 0):
            raise DataError("log_u entries must be finite and <= 0")
        if not self.box > 0:
            raise DataError("box bound must be positive")

    @property
    def p(self) -> int:
        return self.risk.data.p


@dataclass(frozen=True, eq=False)
class SolveReport:
    argmax: np.ndarray
    objective: float
    status: Status
    kkt_residual: float


def check_feasible(beta: np.ndarray, problem: FeasibilityProblem,
                   tol: float | None = None) -> tuple[bool, float]:
    """Whether every constraint holds within ``tol``; worst violation.

    Positive violation means infeasible by that amount (constraint or box).
    """
    tol = SolverOptions().feas_tol if tol is None else tol
    beta = np.asarray(beta, dtype=float)
    f = problem.risk.prefix.constraint_values(beta)
    viol = float(max((problem.log_u - f).max(), np.abs(beta).max() - problem.box))
    return viol <= tol, viol


def solve_qk_star(problem: FeasibilityProblem, k: int,
                  warm_start: np.ndarray | None = None,
                  options: SolverOptions | None = None) -> SolveReport:
    """Maximize failure k's log softmax share under the other m-1 constraints.

    ``exp(objective)`` is the conditional upper bound q_k* in (0, 1].
    """
    opts = options or SolverOptions()
    if not 0 <= k < problem.risk.m:
        raise DataError(f"constraint index {k} out of range")
    report = _solve(problem, ("share", k), exclude=k, warm=warm_start, opts=opts)
    if report.status == "infeasible":
        return report
    return SolveReport(report.argmax, min(0.0, report.objective), report.status,
                       report.kkt_residual)


def solve_representative(problem: FeasibilityProblem, w: np.ndarray,
                         warm_start: np.ndarray | None = None,
                         options: SolverOptions | None = None) -> SolveReport:
    """Maximize ``beta @ w`` over the full constraint system."""
    opts = options or SolverOptions()
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.p,):
        raise DataError(f"direction has shape {w.shape}, expected ({problem.p},)")
    return _solve(problem, ("linear", w), exclude=None, warm=warm_start, opts=opts)


# ---------------------------------------------------------------------------
# barrier machinery


class _SweepBarrier:
    """phi_t and derivatives for one solve over the shared constraint system."""

    def __init__(self, problem: FeasibilityProblem, objective, exclude: int | None):
        pre = problem.risk.prefix
        self.pre = pre
        self.box = float(problem.box)
        self.kind, self.payload = objective
        m = problem.risk.m
        act = np.ones(m, dtype=bool)
        if exclude is not None:
            act[exclude] = False
        self.act = np.flatnonzero(act)
        self.logu_act = np.ascontiguousarray(problem.log_u[self.act])
        self.kidx_act = pre.kidx[self.act]
        self.xf_act = pre.x_fail[self.act]
        self.n_ineq = self.act.size + 2 * pre.p
        # kernel arguments
        self._prefix_len = pre.prefix_len.astype(np.int64)
        self._kidx = pre.kidx.astype(np.int64)
        self._act64 = self.act.astype(np.int64)
        if self.kind == "share":
            self._mode, self._k_obj, self._w = MODE_SHARE, int(self.payload), np.zeros(pre.p)
        else:
            self._mode, self._k_obj, self._w = MODE_LINEAR, 0, np.asarray(self.payload, dtype=float)

    def _fvals(self, beta, order):
        lse, mean, cov = self.pre.stats(beta, order)
        f = self.pre.x_fail @ beta - lse[self.pre.kidx]
        return f, mean, cov

    def objective_value(self, beta):
        if self.kind == "linear":
            return float(beta @ self.payload)
        f = self.pre.constraint_values(beta)
        return float(f[self.payload])

    def phi(self, beta, t):
        """Barrier value, or None when beta is outside the domain."""
        if HAS_NUMBA:
            ok, phi, _, _ = barrier_eval(self.pre.xs, self._prefix_len, self.pre.x_fail,
                                         self._kidx, self._act64, self.logu_act, self.box,
                                         beta, t, self._mode, self._k_obj, self._w, False)
            return phi if ok else None
        return self._phi_numpy(beta, t)

    def phi_grad_hess(self, beta, t):
        if HAS_NUMBA:
            ok, phi, grad, hess = barrier_eval(self.pre.xs, self._prefix_len, self.pre.x_fail,
                                               self._kidx, self._act64, self.logu_act, self.box,
                                               beta, t, self._mode, self._k_obj, self._w, True)
            if not ok:
                raise SolverError("barrier evaluated outside its domain")
            return phi, grad, hess
        return self._phi_grad_hess_numpy(beta, t)

    def _phi_numpy(self, beta, t):
        bs1 = self.box - beta
        bs2 = self.box + beta
        if np.any(bs1 <= 0) or np.any(bs2 <= 0):
            return None
        f, _, _ = self._fvals(beta, order=0)
        sl = f[self.act] - self.logu_act
        if np.any(sl <= 0):
            return None
        f0 = f[self.payload] if self.kind == "share" else float(beta @ self.payload)
        return -t * f0 - np.log(sl).sum() - np.log(bs1).sum() - np.log(bs2).sum()

    def _phi_grad_hess_numpy(self, beta, t):
        f, mean, cov = self._fvals(beta, order=2)
        grads = self.xf_act - mean[self.kidx_act]          # (m_act, p)
        sl = f[self.act] - self.logu_act
        inv_sl = 1.0 / sl
        bs1 = self.box - beta
        bs2 = self.box + beta

        if self.kind == "share":
            k = self.payload
            f0 = f[k]
            g0 = self.pre.x_fail[k] - mean[self.pre.kidx[k]]
            h0 = t * cov[self.pre.kidx[k]]                 # -t * hess(f0)
        else:
            f0 = float(beta @ self.payload)
            g0 = self.payload
            h0 = 0.0

        phi = -t * f0 - np.log(sl).sum() - np.log(bs1).sum() - np.log(bs2).sum()
        grad = -t * g0 - grads.T @ inv_sl + (1.0 / bs1 - 1.0 / bs2)
        curv_w = np.bincount(self.kidx_act, weights=inv_sl, minlength=self.pre.K)
        hess = (
            h0
            + (grads * (inv_sl ** 2)[:, None]).T @ grads
            + np.tensordot(curv_w, cov, axes=1)
            + np.diag(1.0 / bs1 ** 2 + 1.0 / bs2 ** 2)
        )
        return phi, grad, hess


def _newton_center(barrier, z, t, opts: SolverOptions):
    """Damped Newton until the decrement is small; returns (z, grad)."""
    grad = None
    prev_phi = np.inf
    prev_lam2 = np.inf
    for _ in range(opts.max_newton):
        phi, grad, hess = barrier.phi_grad_hess(z, t)
        if phi >= prev_phi:
            return z, grad
        prev_phi = phi
        try:
            d = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            d = None
        if d is None or not np.all(np.isfinite(d)):
            jitter = 1e-10 * max(1.0, float(np.trace(hess)) / hess.shape[0])
            d = -np.linalg.solve(hess + jitter * np.eye(hess.shape[0]), grad)
        lam2 = float(-grad @ d)
        if not np.isfinite(lam2) or lam2 < 0:
            d = -grad / max(1.0, float(np.linalg.norm(grad)))
            lam2 = float(-grad @ d)
        if lam2 / 2.0 <= opts.center_tol:
            return z, grad
        if lam2 < 1e-4 and lam2 > 0.5 * prev_lam2:
            # decrement plateau: float64 noise floor, as centered as it gets
            return z, grad
        prev_lam2 = lam2
        gd = float(grad @ d)
        step = 1.0
        while True:
            cand = z + step * d
            val = barrier.phi(cand, t)
            if val is not None and val <= phi + opts.armijo * step * gd:
                z = cand
                break
            step *= 0.5
            if step < 1e-14:
                # at the floating-point floor of this centering problem
                return z, grad
    phi, grad, hess = barrier.phi_grad_hess(z, t)
    lam2 = float(grad @ np.linalg.solve(hess + 1e-12 * np.eye(hess.shape[0]), grad))
    if lam2 / 2.0 > 1e-6:
        raise SolverError("barrier centering did not converge within the iteration cap")
    return z, grad


def _path_follow(barrier, z0, opts: SolverOptions):
    z = z0
    t = opts.t_init
    while True:
        z, grad = _newton_center(barrier, z, t, opts)
        if barrier.n_ineq / t < opts.gap_tol:
            return z, grad, t
        t *= opts.mu


def _solve(problem, objective, exclude, warm, opts) -> SolveReport:
    barrier = _SweepBarrier(problem, objective, exclude)
    z0 = _starting_point(problem, barrier, warm, opts)
    if z0 is None:
        p = problem.p
        return SolveReport(np.full(p, np.nan), -np.inf, "infeasible", np.inf)
    z, grad, t = _path_follow(barrier, z0, opts)
    kkt = float(np.linalg.norm(grad, np.inf)) / t
    status: Status = "box_active" if (problem.box - np.abs(z).max()) <= 1e-4 * (1.0 + problem.box) else "optimal"
    return SolveReport(z, barrier.objective_value(z), status, kkt)


def _starting_point(problem, barrier, warm, opts):
    """A strictly feasible point for the active constraints, or None."""
    p = problem.p
    cap = problem.box * (1.0 - 1e-9)
    for cand in ([] if warm is None else [np.clip(np.asarray(warm, dtype=float), -cap, cap)]) + [np.zeros(p)]:
        if barrier.phi(cand, opts.t_init) is not None:
            return cand
    return _phase_one(problem, barrier, opts)


class _PhaseOneBarrier:
    """Epigraph barrier for max r s.t. c_h(beta) >= r, |beta| <= B, r bounded."""

    def __init__(self, sweep: _SweepBarrier, r_lo: float, r_hi: float):
        self.sweep = sweep
        self.box = sweep.box
        self.r_lo = r_lo
        self.r_hi = r_hi
        self.n_ineq = sweep.act.size + 2 * sweep.pre.p + 2

    def phi(self, z, t):
        beta, r = z[:-1], z[-1]
        if r <= self.r_lo or r >= self.r_hi:
            return None
        bs1 = self.box - beta
        bs2 = self.box + beta
        if np.any(bs1 <= 0) or np.any(bs2 <= 0):
            return None
        f, _, _ = self.sweep._fvals(beta, order=0)
        sl = f[self.sweep.act] - self.sweep.logu_act - r
        if np.any(sl <= 0):
            return None
        return (-t * r - np.log(sl).sum() - np.log(bs1).sum() - np.log(bs2).sum()
                - np.log(r - self.r_lo) - np.log(self.r_hi - r))

    def phi_grad_hess(self, z, t):
        sweep = self.sweep
        beta, r = z[:-1], z[-1]
        f, mean, cov = sweep._fvals(beta, order=2)
        grads = sweep.xf_act - mean[sweep.kidx_act]
        sl = f[sweep.act] - sweep.logu_act - r
        inv_sl = 1.0 / sl
        bs1 = self.box - beta
        bs2 = self.box + beta
        p = beta.shape[0]

        phi = (-t * r - np.log(sl).sum() - np.log(bs1).sum() - np.log(bs2).sum()
               - np.log(r - self.r_lo) - np.log(self.r_hi - r))
        # constraint gradient in z = (beta, r) is (grad_beta c_h, -1)
        g_beta = -grads.T @ inv_sl + (1.0 / bs1 - 1.0 / bs2)
        g_r = -t + inv_sl.sum() - 1.0 / (r - self.r_lo) + 1.0 / (self.r_hi - r)
        grad = np.concatenate([g_beta, [g_r]])

        inv_sl2 = inv_sl ** 2
        curv_w = np.bincount(sweep.kidx_act, weights=inv_sl, minlength=sweep.pre.K)
        h_bb = ((grads * inv_sl2[:, None]).T @ grads
                + np.tensordot(curv_w, cov, axes=1)
                + np.diag(1.0 / bs1 ** 2 + 1.0 / bs2 ** 2))
        h_br = -grads.T @ inv_sl2
        h_rr = inv_sl2.sum() + 1.0 / (r - self.r_lo) ** 2 + 1.0 / (self.r_hi - r) ** 2
        hess = np.zeros((p + 1, p + 1))
        hess[:p, :p] = h_bb
        hess[:p, p] = h_br
        hess[p, :p] = h_br
        hess[p, p] = h_rr
        return phi, grad, hess


def _phase_one(problem, sweep_barrier, opts):
    if sweep_barrier.act.size == 0:
        return np.zeros(problem.p)
    beta0 = np.zeros(problem.p)
    f0 = problem.risk.prefix.constraint_values(beta0)
    min_sl = float((f0[sweep_barrier.act] - sweep_barrier.logu_act).min())
    r_lo = min_sl - 1.0
    r_hi = max(1.0, float((-sweep_barrier.logu_act).max())) + 1.0
    barrier = _PhaseOneBarrier(sweep_barrier, r_lo, r_hi)
    z = np.concatenate([beta0, [min_sl - 0.5]])
    t = opts.t_init
    phase_opts = SolverOptions(center_tol=1e-8, max_newton=opts.max_newton)
    while True:
        z, _ = _newton_center(barrier, z, t, phase_opts)
        if z[-1] > 1e-3:
            break
        if barrier.n_ineq / t < 1e-6:
            break
        t *= opts.mu
    if z[-1] <= 1e-9:
        return None
    return z[:-1]
