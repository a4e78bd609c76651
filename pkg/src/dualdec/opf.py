"""Multi-period DC optimal power flow as a coupled instance.

Every bus becomes one agent.  Over a horizon of h steps, a generating
bus owns decision variables (P_1..P_h, psi_1..psi_h) and a load-only bus
just its voltage angles (psi_1..psi_h).  The nodal balance at bus i and
step t,

    P_i,t - sum_{j ~ i} B_ij (psi_i,t - psi_j,t) = demand_i,t,

is the coupling block owned by bus i, so a bus's in/out-neighbors are
exactly its electrical neighbors.  Generation cost is quadratic
(a P^2 + b P, a > 0); a small quadratic angle regularization eps_psi
keeps every local cost strongly convex.  The reference bus has its
angles pinned to zero through a degenerate box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import AgentSpec, ProblemInstance, ValidationError

__all__ = ["Bus", "Branch", "Generator", "OpfCase", "load_case", "build_opf_instance"]

DEFAULT_EPS_PSI = 1e-3
DEFAULT_PSI_MAX = np.pi

_CASE_KEYS = {"h", "ref_bus", "eps_psi", "psi_max", "buses", "branches", "generators"}


@dataclass(frozen=True)
class Bus:
    id: int
    demand: np.ndarray  # length h, nonnegative

    def __post_init__(self):
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))


@dataclass(frozen=True)
class Branch:
    i: int
    j: int
    b: float  # susceptance


@dataclass(frozen=True)
class Generator:
    bus: int
    a: float
    b: float
    pmax: float


@dataclass(frozen=True)
class OpfCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    h: int
    ref_bus: int
    eps_psi: float = DEFAULT_EPS_PSI
    psi_max: float = DEFAULT_PSI_MAX


def _validate_case(case: OpfCase) -> None:
    if case.h < 1:
        raise ValidationError(f"horizon must be >= 1, got {case.h}")
    ids = [b.id for b in case.buses]
    if not ids:
        raise ValidationError("case has no buses")
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bus ids")
    id_set = set(ids)
    for b in case.buses:
        if b.demand.shape != (case.h,):
            raise ValidationError(
                f"bus {b.id}: demand has length {b.demand.shape[0] if b.demand.ndim else 0}, "
                f"expected {case.h}"
            )
        if np.any(b.demand < 0) or not np.all(np.isfinite(b.demand)):
            raise ValidationError(f"bus {b.id}: demand must be finite and nonnegative")
    for br in case.branches:
        if br.i not in id_set or br.j not in id_set:
            raise ValidationError(f"branch ({br.i}, {br.j}) references an unknown bus")
        if br.i == br.j:
            raise ValidationError(f"branch ({br.i}, {br.j}) is a self-loop")
        if br.b == 0 or not np.isfinite(br.b):
            raise ValidationError(f"branch ({br.i}, {br.j}): zero susceptance")
    seen = set()
    for gen in case.generators:
        if gen.bus not in id_set:
            raise ValidationError(f"generator references unknown bus {gen.bus}")
        if gen.bus in seen:
            raise ValidationError(
                f"bus {gen.bus} has more than one generator; aggregate them into one"
            )
        seen.add(gen.bus)
        if not (gen.a > 0 and np.isfinite(gen.a) and np.isfinite(gen.b)):
            raise ValidationError(f"generator at bus {gen.bus}: need a > 0 and finite cost")
        if not (gen.pmax > 0 and np.isfinite(gen.pmax)):
            raise ValidationError(f"generator at bus {gen.bus}: need pmax > 0")
    if case.ref_bus not in id_set:
        raise ValidationError(f"reference bus {case.ref_bus} not in the case")
    if not (case.eps_psi > 0 and np.isfinite(case.eps_psi)):
        raise ValidationError("eps_psi must be positive")
    if not (case.psi_max > 0 and np.isfinite(case.psi_max)):
        raise ValidationError("psi_max must be positive")
    # connectivity over the branch graph
    adj = {i: set() for i in ids}
    for br in case.branches:
        adj[br.i].add(br.j)
        adj[br.j].add(br.i)
    stack, seen_b = [ids[0]], {ids[0]}
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen_b:
                seen_b.add(j)
                stack.append(j)
    if seen_b != id_set:
        raise ValidationError(
            f"network graph is disconnected (unreached buses: {sorted(id_set - seen_b)})"
        )


def load_case(path) -> OpfCase:
    """Parse and validate an OPF case JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError("case file must be a JSON object")
    missing = _CASE_KEYS - set(data)
    if missing:
        raise ValidationError(f"case file missing fields: {sorted(missing)}")
    extra = set(data) - _CASE_KEYS
    if extra:
        raise ValidationError(f"case file has unknown fields: {sorted(extra)}")
    try:
        buses = tuple(Bus(id=b["id"], demand=b["demand"]) for b in data["buses"])
        branches = tuple(Branch(i=br["from"], j=br["to"], b=br["b"]) for br in data["branches"])
        gens = tuple(Generator(bus=g["bus"], a=g["a"], b=g["b"], pmax=g["pmax"])
                     for g in data["generators"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed case entry: {exc}") from exc
    case = OpfCase(buses=buses, branches=branches, generators=gens,
                   h=data["h"], ref_bus=data["ref_bus"],
                   eps_psi=data["eps_psi"], psi_max=data["psi_max"])
    _validate_case(case)
    return case


def build_opf_instance(case: OpfCase) -> ProblemInstance:
    """Translate a case into the coupled quadratic form, one agent per bus."""
    _validate_case(case)
    h = case.h
    gen_at = {g.bus: g for g in case.generators}
    # accumulated susceptance between bus pairs (parallel branches add up)
    b_sum: dict[tuple[int, int], float] = {}
    for br in case.branches:
        key = (min(br.i, br.j), max(br.i, br.j))
        b_sum[key] = b_sum.get(key, 0.0) + br.b
    nbrs = {b.id: {} for b in case.buses}
    for (i, j), b in b_sum.items():
        nbrs[i][j] = b
        nbrs[j][i] = b

    dims = {b.id: (2 * h if b.id in gen_at else h) for b in case.buses}
    agents = []
    for bus in case.buses:
        i = bus.id
        gen = gen_at.get(i)
        n = dims[i]
        psi0 = h if gen else 0  # first angle column inside u_i
        if gen:
            diag = np.concatenate([np.full(h, 2.0 * gen.a), np.full(h, 2.0 * case.eps_psi)])
            c = np.concatenate([np.full(h, gen.b), np.zeros(h)])
            lo = np.concatenate([np.zeros(h), np.full(h, -case.psi_max)])
            hi = np.concatenate([np.full(h, gen.pmax), np.full(h, case.psi_max)])
        else:
            diag = np.full(h, 2.0 * case.eps_psi)
            c = np.zeros(h)
            lo = np.full(h, -case.psi_max)
            hi = np.full(h, case.psi_max)
        if i == case.ref_bus:
            lo[psi0:] = 0.0
            hi[psi0:] = 0.0

        own = np.zeros((h, n))
        total_b = sum(nbrs[i].values())
        for t in range(h):
            if gen:
                own[t, t] = 1.0
            own[t, psi0 + t] = -total_b
        blocks = {i: own}
        for j, b in nbrs[i].items():
            Bj = np.zeros((h, dims[j]))
            psi0_j = h if j in gen_at else 0
            for t in range(h):
                Bj[t, psi0_j + t] = b
            blocks[j] = Bj

        agents.append(AgentSpec(id=i, dim=n, Q=None, c=c, lo=lo, hi=hi,
                                m=h, g=bus.demand.copy(), blocks=blocks, diag=diag))
    return ProblemInstance(agents=tuple(agents))
