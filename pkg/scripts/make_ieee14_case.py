#!/usr/bin/env python3
"""Write cases/ieee14.json: the IEEE 14-bus test grid as a day-ahead case.

Branch reactances, bus demands and generator placement follow the
standard published 14-bus data (20 branches, generators at buses
1, 2, 3, 6, 8).  Demands are Pd/100 scaled by a 6-step intra-day
profile.  Susceptances are B_SCALE/x: the 0.1 factor rebases the
impedances so the angle coupling and the generator terms enter the dual
curvature at comparable strength, which keeps the decomposition's
conditioning sane without changing the problem shape (angles simply
come out 10x larger).  Costs are quadratic, chosen well conditioned for
the per-unit scale; the angle regularization weight and psi bound are
recorded in the file so the case is self-contained.
"""

import json
from pathlib import Path

# fbus, tbus, reactance x (p.u.)
BRANCHES = [
    (1, 2, 0.05917), (1, 5, 0.22304), (2, 3, 0.19797), (2, 4, 0.17632),
    (2, 5, 0.17388), (3, 4, 0.17103), (4, 5, 0.04211), (4, 7, 0.20912),
    (4, 9, 0.55618), (5, 6, 0.25202), (6, 11, 0.19890), (6, 12, 0.25581),
    (6, 13, 0.13027), (7, 8, 0.17615), (7, 9, 0.11001), (9, 10, 0.08450),
    (9, 14, 0.27038), (10, 11, 0.19207), (12, 13, 0.19988), (13, 14, 0.34802),
]

# bus id -> base demand Pd (MW)
DEMAND_MW = {
    1: 0.0, 2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 7: 0.0,
    8: 0.0, 9: 29.5, 10: 9.0, 11: 3.5, 12: 6.1, 13: 13.5, 14: 14.9,
}

# bus, a (quadratic, p.u.), b (linear, p.u.), pmax (p.u.)
GENERATORS = [
    (1, 0.5, 1.0, 3.324),
    (2, 0.8, 1.2, 1.400),
    (3, 1.0, 1.5, 1.000),
    (6, 1.0, 1.5, 1.000),
    (8, 1.2, 1.8, 1.000),
]

PROFILE = [0.78, 0.88, 1.00, 1.08, 1.02, 0.90]  # hourly shape, peak mid-day

B_SCALE = 0.1


def main() -> None:
    case = {
        "h": len(PROFILE),
        "ref_bus": 1,
        "eps_psi": 0.5,
        "psi_max": 3.141592653589793,
        "buses": [
            {"id": i, "demand": [round(DEMAND_MW[i] / 100.0 * f, 6) for f in PROFILE]}
            for i in sorted(DEMAND_MW)
        ],
        "branches": [
            {"from": i, "to": j, "b": round(B_SCALE / x, 6)} for i, j, x in BRANCHES
        ],
        "generators": [
            {"bus": bus, "a": a, "b": b, "pmax": pmax} for bus, a, b, pmax in GENERATORS
        ],
    }
    out = Path(__file__).resolve().parents[1] / "cases" / "ieee14.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(case, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
