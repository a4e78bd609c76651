"""Per-agent dual gradient Lipschitz constants and safe step sizes.

The dual gradient block of agent i is Lipschitz with constant

    L_i = sum_{j in N_i + {i}}  ||G^j||^2 / sigma_j,

where G^j stacks every block that multiplies u_j (ascending owner id)
and sigma_j is the strong-convexity modulus of agent j's cost.  Any
eta_i in (0, 1/L_i] is a safe ascent step; ``build_stepsizes`` returns
eta_i = safety / L_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, ValidationError

__all__ = ["StepsizeTable", "spectral_norm", "build_stepsizes"]


def spectral_norm(M, *, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    """Largest singular value via power iteration on M'M.

    Deterministic all-ones start, relative Rayleigh tolerance ``tol``.
    Raises ValueError on an empty matrix and RuntimeError if the
    iteration fails to settle within ``max_iters``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        raise ValueError("spectral_norm: empty matrix")
    A = M.T @ M
    n = A.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    ray_prev = np.inf
    for _ in range(max_iters):
        w = A @ v
        ray = float(np.dot(v, w))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(ray - ray_prev) <= tol * max(abs(ray), 1e-300):
            return float(np.sqrt(max(ray, 0.0)))
        ray_prev = ray
    raise RuntimeError(f"spectral_norm: power iteration did not converge in {max_iters} iterations")


@dataclass(frozen=True)
class StepsizeTable:
    """sigma_i, ||G^i||, L_i and eta_i keyed by agent id."""

    sigma: dict[int, float]
    out_norm: dict[int, float]
    L: dict[int, float]
    eta: dict[int, float]
    safety: float

    def eta_rows(self, instance: ProblemInstance) -> np.ndarray:
        """eta_i repeated over agent i's coupling rows, stacked ascending."""
        parts = [np.full(a.m, self.eta[a.id]) for a in instance.agents]
        return np.concatenate(parts) if parts else np.zeros(0)


def build_stepsizes(instance: ProblemInstance, safety: float = 1.0) -> StepsizeTable:
    """Compute L_i from the coupling structure and set eta_i = safety / L_i."""
    if not (0.0 < safety <= 1.0):
        raise ValidationError(f"safety factor must lie in (0, 1], got {safety}")
    sigma = {a.id: a.sigma for a in instance.agents}
    out_norm = {}
    for a in instance.agents:
        S = instance.out_stack(a.id)
        out_norm[a.id] = spectral_norm(S) if S.shape[0] > 0 else 0.0
    L, eta = {}, {}
    for a in instance.agents:
        hood = set(instance.graph.in_neighbors[a.id]) | {a.id}
        Li = sum(out_norm[j] ** 2 / sigma[j] for j in sorted(hood))
        if Li <= 0.0:
            raise ValidationError(
                f"agent {a.id}: no coupling anywhere in its in-neighborhood (L_i = 0)"
            )
        L[a.id] = Li
        eta[a.id] = safety / Li
    return StepsizeTable(sigma=sigma, out_norm=out_norm, L=L, eta=eta, safety=safety)
