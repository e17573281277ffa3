"""Fixed ell*m budget experiment on dynamic location: final-iteration error per split.

    python3 scripts/fixed_budget.py --budgets 10,20,50 --runs 20
"""
import argparse

import numpy as np

from nsmpi.dp import format_m
from nsmpi.sweep import SWEEP_COLUMNS, dynloc_protocol, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budgets", default="10,20,50")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=150)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    budgets = [int(b) for b in args.budgets.split(",")]
    cfg = dynloc_protocol(budgets=budgets, runs=args.runs, iterations=args.iterations,
                          jobs=args.jobs)
    rows = run_sweep(cfg)
    k_col, loss_col = SWEEP_COLUMNS.index("k"), SWEEP_COLUMNS.index("loss_mean")
    final = {}
    for r in rows:
        if int(r[k_col]) == args.iterations:
            final.setdefault((int(r[0]), r[1]), []).append(float(r[loss_col]))
    print(f"{'ell*m':>6} {'ell':>4} {'m':>4} {'mean':>9} {'std':>8}")
    for (ell, m), vals in sorted(final.items(), key=lambda kv: (ell_m(kv[0]), kv[0][0])):
        print(f"{ell_m((ell, m)):>6} {ell:>4} {m:>4} {np.mean(vals):9.3f} {np.std(vals):8.3f}")


def ell_m(key):
    ell, m = key
    return ell * int(m)


if __name__ == "__main__":
    main()
