#!/usr/bin/env python3
"""Monte Carlo sweep of the link-failure probability on a synthetic problem.

For each gamma the tracker-based solver is run over several seeded
network realizations.  Two artifacts come out:

  <out>            per-run rows        gamma,seed,iters,converged
  <out-gaps>       mean optimality gap by iteration, one column per gamma

The second file is the interesting one: plotting gap against k on a
log-log scale shows the 1/k^2 envelope shifting up as gamma grows.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dualdec import (build_network, build_stepsizes, random_instance, run_alg2,
                     solve_kkt)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--agents", type=int, default=5)
    ap.add_argument("--instance-seed", type=int, default=0)
    ap.add_argument("--gammas", type=str, default="0,0.1,0.3,0.5")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0, help="base network seed; run r uses seed+r")
    ap.add_argument("--iters", type=int, default=400, help="iterations recorded per run")
    ap.add_argument("--eps", type=float, default=1e-8)
    ap.add_argument("--out", type=Path, default=Path("sweep_runs.csv"))
    ap.add_argument("--out-gaps", type=Path, default=Path("sweep_gaps.csv"))
    args = ap.parse_args()

    gammas = sorted(float(s) for s in args.gammas.split(","))
    inst = random_instance(args.agents, seed=args.instance_seed)
    table = build_stepsizes(inst)
    star = solve_kkt(inst)
    print(f"instance: {args.agents} agents, n={inst.n_total}, m={inst.m_total}, "
          f"q*={star.q:.6f} ({star.method})")

    rows = []
    mean_gaps = {}
    for gamma in gammas:
        gaps = np.zeros(args.iters)
        for r in range(args.runs):
            net = build_network(inst, gamma, seed=args.seed + r)
            tr = run_alg2(inst, table, net, args.iters, args.eps, lambda_star=star.lam)
            rows.append((gamma, args.seed + r, tr.iters, int(tr.converged)))
            # converged runs stay at their final gap for the remaining k
            padded = np.full(args.iters, tr.gap[-1] if tr.iters else 0.0)
            padded[:tr.iters] = tr.gap
            gaps += padded
        mean_gaps[gamma] = gaps / args.runs
        done = [it for g, _, it, c in rows if g == gamma and c]
        print(f"gamma={gamma:<4g} converged {len(done)}/{args.runs}"
              + (f", median iters {int(np.median(done))}" if done else ""))

    with open(args.out, "w") as fh:
        fh.write("gamma,seed,iters,converged\n")
        for g, s, it, c in rows:
            fh.write(f"{g!r},{s},{it},{c}\n")
    with open(args.out_gaps, "w") as fh:
        fh.write("k," + ",".join(f"gamma={g!r}" for g in gammas) + "\n")
        for k in range(args.iters):
            fh.write(f"{k+1}," + ",".join(repr(float(mean_gaps[g][k])) for g in gammas) + "\n")
    print(f"wrote {args.out} and {args.out_gaps}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
