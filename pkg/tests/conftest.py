"""Shared fixtures: the bundled case files and a tiny hand-checkable builder."""

from pathlib import Path

import numpy as np
import pytest

from dualdec import load_instance
from dualdec.model import AgentSpec, ProblemInstance

CASES = Path(__file__).resolve().parent.parent / "cases"


def make_pair(hi1: float = 10.0, g: float = 2.0) -> ProblemInstance:
    """Two scalar agents with one shared coupling row  u1 + u2 = g.

    Costs are (1/2) u^2 each, boxes [-10, hi1] x [-10, 10].  With the
    default arguments the minimizer is u = (1, 1) at multiplier -1.
    """
    a1 = AgentSpec(id=1, dim=1, Q=np.empty(0), diag=[1.0], c=[0.0], lo=[-10.0],
                   hi=[hi1], m=1, g=[g], blocks={1: [[1.0]], 2: [[1.0]]})
    a2 = AgentSpec(id=2, dim=1, Q=np.empty(0), diag=[1.0], c=[0.0], lo=[-10.0],
                   hi=[10.0], m=0, g=[], blocks={})
    return ProblemInstance(agents=(a1, a2))


@pytest.fixture(scope="session")
def cases_dir() -> Path:
    return CASES


@pytest.fixture()
def instance_a():
    return load_instance(CASES / "instance_a.json")


@pytest.fixture()
def chain3():
    return load_instance(CASES / "chain3.json")
