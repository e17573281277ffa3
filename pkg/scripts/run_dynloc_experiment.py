"""Full dynamic-location sweep: every (ell, m) cell, run-averaged curves and a summary.

    python3 scripts/run_dynloc_experiment.py --runs 20 --jobs 4 --outdir results/
"""
import argparse
from pathlib import Path

from nsmpi.cli import summary_csv
from nsmpi.dp import format_m
from nsmpi.sweep import dynloc_protocol, mean_curves, rows_to_csv, run_sweep, summarize_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=150)
    ap.add_argument("--epsilon", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()

    cfg = dynloc_protocol(runs=args.runs, iterations=args.iterations, epsilon=args.epsilon,
                          seed=args.seed, jobs=args.jobs)
    rows = run_sweep(cfg)
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / "dynloc_sweep.csv").write_text(rows_to_csv(rows), newline="")
    (args.outdir / "dynloc_summary.csv").write_text(summary_csv(rows), newline="")

    curves = mean_curves(rows, "loss_mean")
    print(f"{'ell':>4} {'m':>4} {'initial':>9} {'plateau':>9} {'conv@':>6}")
    for (ell, m), curve in sorted(curves.items()):
        s = summarize_curve(curve)
        print(f"{ell:>4} {format_m(m):>4} {s.initial:9.3f} {s.plateau:9.3f} {s.converged_at:6d}")


if __name__ == "__main__":
    main()
