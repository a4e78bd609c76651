"""Accelerated distributed dual ascent, with and without link failures.

``run_alg1`` is the full-information driver: every iteration each agent
solves its local QP at the interpolated multipliers, takes a gradient
step on its own block, and applies the momentum update

    theta(k+1) = (1 + sqrt(1 + 4 theta(k)^2)) / 2,
    hat_lam(k+1) = lam(k) + ((theta(k)-1)/theta(k+1)) (lam(k) - lam(k-1)).

``run_alg2`` runs the identical scheme on top of per-neighbor multiplier
trackers.  Agent i keeps a copy of lam_j for every j in M_i; copies are
refreshed only over links that are up at that iteration, and the gradient
step on lam_i is *held* whenever any in-neighbor link is down.  With no
failures the two drivers produce the same trajectory bit for bit.

``run_unaccelerated`` is the momentum-free baseline (theta pinned to 1).

All drivers log, per iteration, the dual value and gradient norm at the
shared multiplier lam(k) (agents' own blocks re-solved jointly), plus the
optional distance diagnostics when the optimal multiplier is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import ProblemInstance, primal_cost
from .netsim import NetworkModel, _active_array
from .stepsize import StepsizeTable
from .subsolver import solve_local

__all__ = [
    "DualEval", "RunTrace", "theta_next", "eval_dual", "eval_dual_batch",
    "run_alg1", "run_alg2", "run_unaccelerated",
    "check_lyapunov_step", "check_quadratic_model",
]

DEFAULT_EPS = 1e-6
TRACE_HEADER = "k,q,residual,gap,V,updates"


def theta_next(theta: float) -> float:
    """Momentum recursion theta+ = (1 + sqrt(1 + 4 theta^2)) / 2."""
    if theta < 1.0:
        raise ValueError(f"theta must be >= 1, got {theta}")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))


class DualEval(NamedTuple):
    q: float
    grad: np.ndarray
    u: np.ndarray


def eval_dual(instance: ProblemInstance, lam: np.ndarray) -> DualEval:
    """Dual value, dual gradient and local minimizers at a shared multiplier.

    The gradient block of agent i is its coupling residual
    G_i^i u_i + sum_j G_i^j u_j - g_i at the jointly re-solved u(lam).
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (instance.m_total,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({instance.m_total},)")
    A = instance.coupling_matrix
    a = A.T @ lam
    d = instance.qdiag_vec
    if d is not None:
        u = np.clip(-(instance.c_vec + a) / d, instance.lo_vec, instance.hi_vec)
    else:
        u = np.empty(instance.n_total)
        for ag in instance.agents:
            sl = instance.u_slice(ag.id)
            u[sl] = solve_local(ag, a[sl])
    q = primal_cost(instance, u) - float(np.dot(lam, instance.g_vec)) + float(np.dot(a, u))
    grad = A @ u - instance.g_vec
    return DualEval(q=q, grad=grad, u=u)


def eval_dual_batch(instance: ProblemInstance, lams: np.ndarray):
    """Vectorized ``eval_dual`` over the columns of ``lams`` (m x S)."""
    lams = np.asarray(lams, dtype=float)
    A = instance.coupling_matrix
    a = A.T @ lams
    d = instance.qdiag_vec
    if d is not None:
        u = np.clip(-(instance.c_vec[:, None] + a) / d[:, None],
                    instance.lo_vec[:, None], instance.hi_vec[:, None])
        fvals = 0.5 * np.einsum("is,is->s", u, d[:, None] * u) + instance.c_vec @ u
    else:
        u = np.empty((instance.n_total, lams.shape[1]))
        for s in range(lams.shape[1]):
            u[:, s] = eval_dual(instance, lams[:, s]).u
        fvals = np.array([primal_cost(instance, u[:, s]) for s in range(lams.shape[1])])
    q = fvals - instance.g_vec @ lams + np.einsum("is,is->s", a, u)
    grad = A @ u - instance.g_vec[:, None]
    return q, grad, u


@dataclass
class RunTrace:
    """Per-iteration log of one run.

    ``lam[k-1]`` is the stacked multiplier after iteration k; ``q`` and
    ``residual`` are evaluated at that shared multiplier.  ``gap`` and
    ``V`` are populated only when the run was given the optimal
    multiplier; ``updates[k-1, p]`` says whether agent p (ascending id)
    took its gradient step at iteration k.
    """

    algo: str
    instance: ProblemInstance = field(repr=False)
    eta: np.ndarray
    alpha: np.ndarray
    eps: float
    converged: bool
    iters: int
    theta: np.ndarray
    q: np.ndarray
    residual: np.ndarray
    updates: np.ndarray
    lam: np.ndarray
    gap: np.ndarray | None = None
    V: np.ndarray | None = None
    q_star: float | None = None
    lambda_star: np.ndarray | None = None
    u_final: np.ndarray | None = None

    def lam_at(self, k: int) -> np.ndarray:
        """lam(k), with lam(0) = 0."""
        if k == 0:
            return np.zeros(self.instance.m_total)
        return self.lam[k - 1]

    def theta_at(self, k: int) -> float:
        return float(self.theta[k - 1])

    def omega(self, k: int, lambda_star: np.ndarray | None = None) -> np.ndarray:
        """Stacked momentum-corrected distance theta(k) lam(k) - (theta(k)-1) lam(k-1) - lam*."""
        ls = self.lambda_star if lambda_star is None else np.asarray(lambda_star, float)
        if ls is None:
            raise ValueError("omega needs the optimal multiplier")
        th = self.theta_at(k)
        return th * self.lam_at(k) - (th - 1.0) * self.lam_at(k - 1) - ls

    def to_csv(self, path) -> None:
        """Write ``k,q,residual,gap,V,updates`` rows; floats via repr."""
        lines = [TRACE_HEADER]
        for k in range(1, self.iters + 1):
            gap = repr(float(self.gap[k - 1])) if self.gap is not None else ""
            V = repr(float(self.V[k - 1])) if self.V is not None else ""
            bits = "".join("1" if b else "0" for b in self.updates[k - 1])
            lines.append(f"{k},{float(self.q[k-1])!r},{float(self.residual[k-1])!r},{gap},{V},{bits}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


class _AgentWork:
    """Precomputed per-agent arrays for the iteration loops."""

    __slots__ = ("id", "pos", "n", "m", "eta", "g", "G_own", "in_blocks",
                 "GT_out", "tr_len", "tr_entries", "self_sl", "agent",
                 "in_edge_idx")

    def __init__(self, instance, table, agent, pos_of):
        self.id = agent.id
        self.pos = pos_of[agent.id]
        self.agent = agent
        self.n = agent.dim
        self.m = agent.m
        self.eta = table.eta[agent.id]
        self.g = agent.g
        self.G_own = agent.blocks.get(agent.id)
        self.in_blocks = [(pos_of[j], agent.blocks[j])
                          for j in instance.graph.in_neighbors[agent.id]]
        self.GT_out = np.ascontiguousarray(instance.out_stack(agent.id).T)
        entries = instance.out_slices(agent.id)
        self.tr_len = entries[-1][1].stop if entries else 0
        self.tr_entries = [(pos_of[j], sl) for j, sl in entries]
        self.self_sl = next(sl for j, sl in entries if j == agent.id)
        self.in_edge_idx = None  # filled by the tracked driver


def _workspace(instance: ProblemInstance, table: StepsizeTable):
    pos_of = {i: p for p, i in enumerate(instance.ids)}
    return [_AgentWork(instance, table, a, pos_of) for a in instance.agents]


def _local_solve(w: _AgentWork, a: np.ndarray) -> np.ndarray:
    ag = w.agent
    if ag.is_diagonal:
        return np.clip(-(ag.c + a) / ag.diag, ag.lo, ag.hi)
    return solve_local(ag, a)


def _own_residual(w: _AgentWork, u_i, contribs) -> np.ndarray:
    """G_i^i u_i + sum over in-neighbors (ascending id) - g_i."""
    r = w.G_own @ u_i
    for c in contribs:
        r = r + c
    return r - w.g


class _Logger:
    """Shared per-iteration bookkeeping for all drivers."""

    def __init__(self, instance, table, alpha_by_id, lambda_star):
        self.instance = instance
        self.eta_arr = np.array([table.eta[i] for i in instance.ids])
        self.alpha_arr = np.array([alpha_by_id[i] for i in instance.ids])
        self.lambda_star = None
        self.q_star = None
        if lambda_star is not None:
            self.lambda_star = np.asarray(lambda_star, dtype=float)
            self.q_star = eval_dual(instance, self.lambda_star).q
        self.q, self.res, self.lam, self.upd = [], [], [], []
        self.gap, self.V, self.theta = [], [], []
        self.last_u = None

    def log(self, k, theta_k, lam_stacked, lam_prev_stacked, upd_row):
        ev = eval_dual(self.instance, lam_stacked)
        self.q.append(ev.q)
        self.res.append(float(np.linalg.norm(ev.grad)))
        self.lam.append(lam_stacked)
        self.upd.append(upd_row)
        self.theta.append(theta_k)
        self.last_u = ev.u
        if self.lambda_star is not None:
            self.gap.append(self.q_star - ev.q)
            omega = theta_k * lam_stacked - (theta_k - 1.0) * lam_prev_stacked - self.lambda_star
            v = 0.0
            for p, i in enumerate(self.instance.ids):
                sl = self.instance.lam_slice(i)
                if sl.stop > sl.start:
                    w = omega[sl]
                    v += float(np.dot(w, w)) / (2.0 * self.alpha_arr[p] * self.eta_arr[p])
            self.V.append(v)

    def finish(self, algo, eps, converged, iters):
        n = len(self.instance.ids)
        m = self.instance.m_total
        return RunTrace(
            algo=algo, instance=self.instance, eta=self.eta_arr, alpha=self.alpha_arr,
            eps=eps, converged=converged, iters=iters,
            theta=np.array(self.theta), q=np.array(self.q), residual=np.array(self.res),
            updates=(np.array(self.upd, dtype=bool).reshape(iters, n)
                     if iters else np.zeros((0, n), dtype=bool)),
            lam=(np.array(self.lam).reshape(iters, m) if iters else np.zeros((0, m))),
            gap=np.array(self.gap) if self.lambda_star is not None else None,
            V=np.array(self.V) if self.lambda_star is not None else None,
            q_star=self.q_star, lambda_star=self.lambda_star, u_final=self.last_u,
        )


def run_alg1(instance: ProblemInstance, stepsizes: StepsizeTable, max_iters: int,
             eps: float = DEFAULT_EPS, *, lambda_star: np.ndarray | None = None,
             lam0: np.ndarray | None = None) -> RunTrace:
    """Full-information accelerated dual ascent.

    Stops at the first iteration where every agent's own residual norm
    (at that iteration's local solutions) drops below ``eps``.
    Non-convergence within ``max_iters`` is reported on the trace, not
    raised.  ``lam0`` warm-starts lam(0) (default zero).
    """
    ws = _workspace(instance, stepsizes)
    log = _Logger(instance, stepsizes, {i: 1.0 for i in instance.ids}, lambda_star)
    n_agents = len(ws)

    if lam0 is None:
        lam_cur = [np.zeros(w.m) for w in ws]
    else:
        lam0 = np.asarray(lam0, dtype=float)
        lam_cur = [lam0[instance.lam_slice(w.id)].copy() for w in ws]
    hat = [v.copy() for v in lam_cur]
    theta = 1.0
    converged = False
    iters = 0

    for k in range(1, max_iters + 1):
        # local solves at the interpolated multipliers
        u = []
        for w in ws:
            hat_stack = np.concatenate([hat[p] for p, _ in w.tr_entries])
            u.append(_local_solve(w, w.GT_out @ hat_stack))
        # gradient step on each agent's own block
        lam_new, ok = [], True
        for w in ws:
            if w.m == 0:
                lam_new.append(lam_cur[w.pos])
                continue
            r = _own_residual(w, u[w.pos], [B @ u[p] for p, B in w.in_blocks])
            lam_new.append(hat[w.pos] + w.eta * r)
            if float(np.linalg.norm(r)) >= eps:
                ok = False
        theta_new = theta_next(theta)
        coef = (theta - 1.0) / theta_new
        prev_stacked = np.concatenate(lam_cur) if instance.m_total else np.zeros(0)
        for w in ws:
            hat[w.pos] = lam_new[w.pos] + coef * (lam_new[w.pos] - lam_cur[w.pos])
        lam_cur = lam_new
        lam_stacked = np.concatenate(lam_cur) if instance.m_total else np.zeros(0)
        log.log(k, theta, lam_stacked, prev_stacked, np.ones(n_agents, dtype=bool))
        theta = theta_new
        iters = k
        if ok:
            converged = True
            break
    return log.finish("alg1", eps, converged, iters)


def _run_tracked(instance, stepsizes, network, max_iters, eps, accelerate,
                 lambda_star, lam0, algo):
    ws = _workspace(instance, stepsizes)
    for w in ws:
        w.in_edge_idx = np.array(
            [network.edge_index[(min(w.id, j), max(w.id, j))]
             for j in instance.graph.in_neighbors[w.id]],
            dtype=int,
        )
    # tracker edge index per out-neighborhood entry (-1 marks the self copy)
    tr_edge = []
    for w in ws:
        row = []
        for p, sl in w.tr_entries:
            j = instance.ids[p]
            row.append(-1 if j == w.id else network.edge_index[(min(w.id, j), max(w.id, j))])
        tr_edge.append(row)

    log = _Logger(instance, stepsizes, dict(network.alpha), lambda_star)
    n_agents = len(ws)

    if lam0 is None:
        lam_parts = [np.zeros(w.m) for w in ws]
    else:
        lam0 = np.asarray(lam0, dtype=float)
        lam_parts = [lam0[instance.lam_slice(w.id)].copy() for w in ws]
    # trackers: agent i's stacked copies of lam_j, j in M_i ascending
    tr_prev = [np.concatenate([lam_parts[p] for p, _ in w.tr_entries])
               if w.tr_len else np.zeros(0) for w in ws]
    tr_hat = [v.copy() for v in tr_prev]
    recv = [[np.zeros(w.m) for _ in w.in_blocks] for w in ws]
    lam_cur = lam_parts
    theta = 1.0
    converged = False
    iters = 0

    for k in range(1, max_iters + 1):
        act = _active_array(network, k)
        # local solves at the tracked interpolated multipliers
        u = [_local_solve(w, w.GT_out @ tr_hat[w.pos]) for w in ws]
        # primal exchange over links that are up
        for w in ws:
            cache = recv[w.pos]
            for e, (p, B) in enumerate(w.in_blocks):
                if act[w.in_edge_idx[e]]:
                    cache[e] = B @ u[p]
        # gradient step, held unless every in-neighbor link is up
        lam_new, upd_row, ok = [], np.zeros(n_agents, dtype=bool), True
        for w in ws:
            if w.m == 0:
                lam_new.append(lam_cur[w.pos])
                upd_row[w.pos] = True
                continue
            s = _own_residual(w, u[w.pos], recv[w.pos])
            if bool(act[w.in_edge_idx].all()):
                lam_new.append(tr_hat[w.pos][w.self_sl] + w.eta * s)
                upd_row[w.pos] = True
            else:
                lam_new.append(tr_hat[w.pos][w.self_sl].copy())
            if float(np.linalg.norm(s)) >= eps:
                ok = False
        # multiplier exchange and tracker refresh
        theta_new = theta_next(theta) if accelerate else 1.0
        coef = (theta - 1.0) / theta_new
        prev_stacked = np.concatenate(lam_cur) if instance.m_total else np.zeros(0)
        for w in ws:
            cur = np.empty(w.tr_len)
            for (p, sl), eidx in zip(w.tr_entries, tr_edge[w.pos]):
                if eidx < 0 or act[eidx]:
                    cur[sl] = lam_new[p]
                else:
                    cur[sl] = tr_hat[w.pos][sl]
            tr_hat[w.pos] = cur + coef * (cur - tr_prev[w.pos])
            tr_prev[w.pos] = cur
        lam_cur = lam_new
        lam_stacked = np.concatenate(lam_cur) if instance.m_total else np.zeros(0)
        log.log(k, theta, lam_stacked, prev_stacked, upd_row)
        theta = theta_new
        iters = k
        if ok:
            converged = True
            break
    return log.finish(algo, eps, converged, iters)


def run_alg2(instance: ProblemInstance, stepsizes: StepsizeTable, network: NetworkModel,
             max_iters: int, eps: float = DEFAULT_EPS, *,
             lambda_star: np.ndarray | None = None,
             lam0: np.ndarray | None = None) -> RunTrace:
    """Tracker-based accelerated dual ascent over an unreliable network.

    Stopping uses each agent's most recently received neighbor
    contributions (zero before anything arrives over a link); the trace
    additionally records the true residual at the shared multiplier.
    """
    return _run_tracked(instance, stepsizes, network, max_iters, eps, True,
                        lambda_star, lam0, "alg2")


def run_unaccelerated(instance: ProblemInstance, stepsizes: StepsizeTable,
                      network: NetworkModel, max_iters: int, eps: float = DEFAULT_EPS, *,
                      lambda_star: np.ndarray | None = None,
                      lam0: np.ndarray | None = None) -> RunTrace:
    """Momentum-free baseline: theta pinned to 1, trackers equal their interpolants."""
    return _run_tracked(instance, stepsizes, network, max_iters, eps, False,
                        lambda_star, lam0, "unaccel")


def check_lyapunov_step(trace: RunTrace, k: int,
                        lambda_star: np.ndarray | None = None) -> bool:
    """One-step decrease certificate of the scaled distance sequence.

    Verifies, at iteration k of a full-information run,

        sum_i (||omega_i(k+1)||^2 - ||omega_i(k)||^2) / (2 eta_i)
            <= theta(k)^2 (q* - q(lam(k))) - theta(k+1)^2 (q* - q(lam(k+1)))

    with slack 1e-9 (1 + |q*|).  Requires 1 <= k < trace.iters.
    """
    if not (1 <= k < trace.iters):
        raise ValueError(f"need 1 <= k < {trace.iters}, got {k}")
    inst = trace.instance
    ls = trace.lambda_star if lambda_star is None else np.asarray(lambda_star, float)
    if ls is None:
        raise ValueError("check_lyapunov_step needs the optimal multiplier")
    q_star = trace.q_star if (lambda_star is None and trace.q_star is not None) \
        else eval_dual(inst, ls).q
    w_k = trace.omega(k, ls)
    w_k1 = trace.omega(k + 1, ls)
    lhs = 0.0
    for p, i in enumerate(inst.ids):
        sl = inst.lam_slice(i)
        if sl.stop > sl.start:
            a, b = w_k1[sl], w_k[sl]
            lhs += (float(np.dot(a, a)) - float(np.dot(b, b))) / (2.0 * trace.eta[p])
    th_k, th_k1 = trace.theta_at(k), trace.theta_at(k + 1)
    rhs = th_k ** 2 * (q_star - trace.q[k - 1]) - th_k1 ** 2 * (q_star - trace.q[k])
    return lhs <= rhs + 1e-9 * (1.0 + abs(q_star))


def check_quadratic_model(instance: ProblemInstance, stepsizes: StepsizeTable,
                          xi: np.ndarray, mu: np.ndarray, slack: float = 1e-9) -> bool:
    """Lower bound on the progress of one proximal gradient step.

    With lam(xi) = xi + diag(eta) grad q(xi) blockwise, verifies

        q(lam(xi)) - q(mu) >= sum_i <xi_i - mu_i, lam_i(xi) - xi_i> / eta_i
                              + sum_i ||lam_i(xi) - xi_i||^2 / (2 eta_i)

    within ``slack`` for arbitrary multipliers xi, mu.
    """
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    eta_rows = stepsizes.eta_rows(instance)
    grad = eval_dual(instance, xi).grad
    step = eta_rows * grad
    lam_xi = xi + step
    q_lam = eval_dual(instance, lam_xi).q
    q_mu = eval_dual(instance, mu).q
    rhs = float(np.sum((xi - mu) * grad + 0.5 * eta_rows * grad * grad))
    return q_lam - q_mu >= rhs - slack
