"""Gamma sweep for one heat source with log-log convergence rates.

    python scripts/gamma_sweep.py --example 1 --gmin 3.9e-7 --gmax 4.1e-6 --count 8
"""

import argparse
from pathlib import Path

import numpy as np

from convcool import AlgorithmConfig, Discretization, example_source
from convcool.analysis import compute_rates, sweep_point
from convcool.io import write_sweep_csv
from convcool.optimizer import run_algorithm


def fmt(x):
    return "" if x is None or not np.isfinite(x) else f"{x:7.3f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--example", type=int, default=1)
    ap.add_argument("--gmin", type=float, default=3.9e-7)
    ap.add_argument("--gmax", type=float, default=4.1e-6)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--n1", type=int, default=5)
    ap.add_argument("--eps1", type=float, default=1e-4)
    ap.add_argument("--out", type=Path, default=Path("results/sweep.csv"))
    args = ap.parse_args()

    d = Discretization(args.n)
    f = example_source(args.example)
    points = []
    for g in np.geomspace(args.gmin, args.gmax, args.count):
        r = run_algorithm(d, AlgorithmConfig(gamma=float(g), n1=args.n1, eps1=args.eps1), f)
        if not r.converged:
            print(f"gamma={g:.3e}: not converged")
        points.append(sweep_point(d, r.state))
    table = compute_rates(points)
    print(f"{'gamma':>10} {'J':>11} {'r_J':>7} {'r_T':>7} {'r_v':>7}")
    for row in table.rows:
        print(f"{row.gamma:10.3e} {row.J:11.5e} {fmt(row.r_J):>7} {fmt(row.r_T):>7} {fmt(row.r_v):>7}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(args.out, table)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
