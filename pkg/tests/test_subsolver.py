"""Local box-constrained QP solves: closed form, accelerated PGD, batching."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualdec import eval_dual, dual_value_term, random_instance, solve_local
from dualdec.model import AgentSpec
from dualdec.subsolver import solve_local_batch

RNG = np.random.default_rng(1234)


def diag_agent(diag, c, lo, hi, **kw):
    n = len(diag)
    kw.setdefault("m", 0)
    kw.setdefault("g", [])
    kw.setdefault("blocks", {})
    return AgentSpec(id=1, dim=n, Q=np.empty(0), diag=diag, c=c, lo=lo, hi=hi, **kw)


def dense_agent(Q, c, lo, hi):
    return AgentSpec(id=1, dim=len(c), Q=np.asarray(Q, float), c=c, lo=lo, hi=hi,
                     m=0, g=[], blocks={})


def local_objective(agent, a, u):
    return agent.cost(u) + float(np.dot(a, u))


def test_closed_form_matches_hand_values():
    ag = diag_agent([1.0], [0.0], [-10.0], [10.0])
    assert solve_local(ag, np.array([-1.0]))[0] == 1.0
    assert solve_local(ag, np.array([3.0]))[0] == -3.0
    assert solve_local(ag, np.array([100.0]))[0] == -10.0  # clipped at lo
    assert solve_local(ag, np.array([-100.0]))[0] == 10.0  # clipped at hi


def test_closed_form_general_diagonal():
    ag = diag_agent([2.0, 4.0], [1.0, -2.0], [-1.0, -1.0], [1.0, 1.0])
    u = solve_local(ag, np.array([0.5, 0.0]))
    np.testing.assert_allclose(u, [-0.75, 0.5])


def test_pgd_equals_closed_form():
    ag = diag_agent([2.0, 0.5, 1.0], [0.3, -1.0, 2.0], [-2.0, -2.0, -2.0],
                    [2.0, 2.0, 2.0])
    for trial in range(50):
        a = RNG.normal(size=3) * 3
        u_closed = solve_local(ag, a, method="closed")
        u_pgd = solve_local(ag, a, method="pgd")
        np.testing.assert_allclose(u_pgd, u_closed, atol=1e-9)


def test_dense_optimality_condition():
    # fixed point of the projected gradient map certifies the minimizer
    Q = np.array([[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.5]])
    ag = dense_agent(Q, [0.5, -1.0, 0.0], [-1.0] * 3, [1.0] * 3)
    step = 1.0 / np.linalg.norm(Q, 2)
    for trial in range(200):
        a = RNG.normal(size=3) * 2
        u = solve_local(ag, a)
        fp = np.clip(u - step * (Q @ u + ag.c + a), ag.lo, ag.hi)
        np.testing.assert_allclose(fp, u, atol=1e-10)


def test_dense_beats_random_feasible_points():
    Q = np.array([[2.0, 0.8], [0.8, 1.0]])
    ag = dense_agent(Q, [0.0, 0.3], [-1.0, -1.0], [1.0, 1.0])
    a = np.array([0.7, -0.2])
    u = solve_local(ag, a)
    best = local_objective(ag, a, u)
    pts = RNG.uniform(-1.0, 1.0, size=(1000, 2))
    vals = 0.5 * np.einsum("ki,ij,kj->k", pts, Q, pts) + pts @ (ag.c + a)
    assert best <= vals.min() + 1e-12


def test_dense_matches_grid_bruteforce():
    Q = np.array([[1.5, -0.4], [-0.4, 1.0]])
    ag = dense_agent(Q, [0.2, -0.5], [-1.0, -1.0], [1.0, 1.0])
    a = np.array([-0.9, 0.1])
    grid = np.linspace(-1.0, 1.0, 401)
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = 0.5 * np.einsum("ki,ij,kj->k", pts, Q, pts) + pts @ (ag.c + a)
    u_grid = pts[vals.argmin()]
    u = solve_local(ag, a)
    np.testing.assert_allclose(u, u_grid, atol=2 * (grid[1] - grid[0]))


@settings(deadline=None, max_examples=60)
@given(st.lists(st.floats(-4.0, 4.0), min_size=2, max_size=2),
       st.lists(st.floats(-4.0, 4.0), min_size=2, max_size=2))
def test_solution_map_is_nonexpansive_over_sigma(a1, a2):
    # |u(a) - u(a')| <= |a - a'| / sigma  (strong convexity of the local cost)
    ag = diag_agent([2.0, 3.0], [0.1, -0.1], [-1.0, -1.0], [1.0, 1.0])
    u1 = solve_local(ag, np.array(a1))
    u2 = solve_local(ag, np.array(a2))
    lhs = np.linalg.norm(u1 - u2)
    assert lhs <= np.linalg.norm(np.array(a1) - np.array(a2)) / ag.sigma + 1e-12


def test_pgd_raises_when_starved():
    Q = np.array([[2.0, 0.9], [0.9, 1.0]])
    ag = dense_agent(Q, [1.0, 1.0], [-5.0, -5.0], [5.0, 5.0])
    with pytest.raises(RuntimeError, match="local QP solve stalled"):
        solve_local(ag, np.array([4.0, -3.0]), max_iters=2)


def test_batch_matches_loop():
    ag = diag_agent([1.0, 2.0], [0.5, 0.0], [-3.0, -3.0], [3.0, 3.0])
    A = RNG.normal(size=(2, 64)) * 5
    U = solve_local_batch(ag, A)
    for col in range(A.shape[1]):
        np.testing.assert_array_equal(U[:, col], solve_local(ag, A[:, col]))


def test_dual_value_terms_sum_to_dual(chain3):
    lam = np.array([0.3, -1.2, 0.7])
    ev = eval_dual(chain3, lam)
    total = sum(dual_value_term(chain3, i, lam, ev.u[chain3.u_slice(i)])
                for i in chain3.ids)
    assert total == pytest.approx(ev.q, abs=1e-12)
