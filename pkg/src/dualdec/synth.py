"""Seeded random instance generator for experiments and tests.

Instances are built feasible by construction: the right-hand sides are
the coupling map evaluated at a random interior point.  Diagonal blocks
get an identity boost so the stacked coupling map stays well
conditioned and the optimal multiplier stays moderate.  Draws whose
stacked coupling matrix is row-rank deficient (possible when an agent
owns more rows than its neighborhood has columns) are rejected and
redrawn deterministically, so the optimal multiplier is always unique.
"""

from __future__ import annotations

import numpy as np

from .model import AgentSpec, ProblemInstance

__all__ = ["random_instance"]


def random_instance(n_agents: int = 5, *, seed: int = 0, max_dim: int = 3,
                    max_m: int = 2, max_in: int = 2, diagonal: bool = True,
                    box: float = 50.0) -> ProblemInstance:
    """Random coupled instance with ``n_agents`` agents.

    Each agent gets 1..max_dim variables, 1..max_m coupling rows, and up
    to ``max_in`` in-neighbors.  ``diagonal`` switches the local costs
    between diagonal and dense symmetric positive definite.  Boxes are
    [-box, box]; feasibility is guaranteed by construction.
    """
    if n_agents < 1:
        raise ValueError("need at least one agent")
    for attempt in range(100):
        rng = np.random.default_rng(seed if attempt == 0 else (seed, attempt))
        inst = _draw(rng, n_agents, max_dim, max_m, max_in, diagonal, box)
        G = inst.coupling_matrix
        if G.shape[0] <= G.shape[1]:
            svals = np.linalg.svd(G, compute_uv=False)
            if svals[-1] > 1e-6 * svals[0]:
                return inst
    raise RuntimeError(f"no well-posed instance found for seed {seed}")


def _draw(rng, n_agents, max_dim, max_m, max_in, diagonal, box) -> ProblemInstance:
    ids = list(range(1, n_agents + 1))
    dims = {i: int(rng.integers(1, max_dim + 1)) for i in ids}
    ms = {i: int(rng.integers(1, max_m + 1)) for i in ids}
    u0 = {i: rng.uniform(-1.0, 1.0, dims[i]) for i in ids}

    agents = []
    for i in ids:
        n, m = dims[i], ms[i]
        others = [j for j in ids if j != i]
        k = int(rng.integers(0, min(max_in, len(others)) + 1)) if others else 0
        nbrs = sorted(rng.choice(others, size=k, replace=False).tolist()) if k else []
        blocks = {i: rng.uniform(-1.0, 1.0, (m, n)) + 1.5 * np.eye(m, n)}
        for j in nbrs:
            B = rng.uniform(-1.0, 1.0, (m, dims[j]))
            if not np.any(B):  # vanishingly unlikely, but keep the invariant
                B[0, 0] = 1.0
            blocks[j] = B
        g = blocks[i] @ u0[i]
        for j in nbrs:
            g = g + blocks[j] @ u0[j]
        if diagonal:
            diag, Q = rng.uniform(0.5, 2.0, n), None
        else:
            A = rng.normal(size=(n, n))
            diag, Q = None, A.T @ A / n + 0.5 * np.eye(n)
        agents.append(AgentSpec(
            id=i, dim=n, Q=Q, c=rng.uniform(-1.0, 1.0, n),
            lo=np.full(n, -box), hi=np.full(n, box),
            m=m, g=g, blocks=blocks, diag=diag,
        ))
    return ProblemInstance(agents=tuple(agents))
