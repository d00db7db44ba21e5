"""Bounds versus n (gamma = 1e4 / n^2) for the reduced relaxation.

Usage: python scripts/scaling.py [--sizes 4,8,12,16,18] [--out results/scaling.csv]
"""

import argparse
import os

from lowrank_sdp import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,8,12,16,18")
    ap.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    ap.add_argument("--relaxations", default="reduced")
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--tol", type=float, default=1e-5)
    ap.add_argument("--out", default="results/scaling.csv")
    args = ap.parse_args()
    cfg = bench.ExperimentConfig(
        p=args.p, seeds=[int(s) for s in args.seeds.split(",")],
        sizes=[int(s) for s in args.sizes.split(",")],
        relaxations=args.relaxations.split(","),
        solver=bench.with_tolerance(bench.SolverSettings(), args.tol, None),
    )
    rows = bench.run_scaling(cfg)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    bench.write_csv(rows, args.out)
    for n in cfg.sizes:
        cells = [r for r in rows if r["n"] == n]
        lb = sum(r["lower_bound"] for r in cells) / len(cells)
        ub = sum(r["upper_bound"] for r in cells) / len(cells)
        g = sum(r["gap"] for r in cells) / len(cells)
        print(f"n={n:3d}  mean lb/n^2={lb:.5f}  mean ub/n^2={ub:.5f}  mean gap={g:.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
