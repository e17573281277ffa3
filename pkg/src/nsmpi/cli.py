"""Command-line entry point: ``nsmpi {solve,tight,sweep,bench-dynloc,gen-garnet}``.

Every option can also come from a TOML or JSON file passed with ``--config``
(keys are option names with ``-`` or ``_``); explicit flags win over the file.
Exit codes: 0 success, 1 failed check or non-convergence, 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .benchmarks import DynamicLocationSpec, GarnetSpec, dynamic_location_mdp, garnet_mdp
from .dp import (
    ConvergenceFailure,
    NsmpiConfig,
    evaluate_stationary,
    format_m,
    nsmpi_run,
    optimal_value,
    parse_m,
    reference_pi,
    reference_vi,
    run_trace,
)
from .mdp import FiniteMdp, InvalidInput, greedy_policy, max_norm_distance, optimality_op
from .sweep import (
    DEFAULT_ELL_GRID,
    DEFAULT_M_GRID,
    SweepConfig,
    fmt,
    mean_curves,
    rows_to_csv,
    run_sweep,
    summarize_curve,
)
from .tight import TightInstanceSpec, build_tight_mdp, verify_tight_trajectory

log = logging.getLogger("nsmpi")

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

COMMON_DEFAULTS = {
    "gamma": 0.9,
    "epsilon": 0.1,
    "n": 8,
    "garnet_states": 20,
    "garnet_actions": 3,
    "garnet_branching": 3,
    "garnet_seed": 0,
    "out": None,
}
DEFAULTS = {
    "solve": dict(COMMON_DEFAULTS, mdp=None, source=None, method="pi", m="2", ell=1,
                  iterations=50, trace=None),
    "tight": dict(COMMON_DEFAULTS, ell=2, m="3", iterations=8, num_states=None),
    "sweep": dict(COMMON_DEFAULTS, source="dynloc", ell_grid=",".join(map(str, DEFAULT_ELL_GRID)),
                  m_grid=",".join(format_m(m) for m in DEFAULT_M_GRID), epsilon=4.0,
                  gamma=0.98, iterations=150, runs=20, seed=0, budgets="", timing=False,
                  jobs=1, summary=None),
    "gen-garnet": dict(COMMON_DEFAULTS, states=20, actions=3, branching=3, seed=0,
                       sparsity=0.0),
}
DEFAULTS["bench-dynloc"] = dict(DEFAULTS["sweep"], source="dynloc")


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a table/object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _resolve(args) -> argparse.Namespace:
    """Merge built-in defaults < config file < explicit flags."""
    merged = {k.replace("-", "_"): v for k, v in DEFAULTS[args.command].items()}
    if args.config:
        file_opts = _load_config(args.config)
        unknown = set(file_opts) - set(merged)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_opts)
    for k, v in vars(args).items():
        if v is not None:
            merged[k] = v
    return argparse.Namespace(**merged)


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _m_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [parse_m(x) for x in text]
    return [parse_m(x) for x in str(text).split(",") if x.strip()]


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def _source_mdp(o, ell=1, m=0) -> FiniteMdp:
    if o.mdp:
        return FiniteMdp.load(o.mdp)
    if o.source == "tight":
        return build_tight_mdp(TightInstanceSpec(ell, m, o.epsilon, o.gamma, o.iterations))
    if o.source == "dynloc":
        return dynamic_location_mdp(DynamicLocationSpec(o.n, o.gamma))
    if o.source == "garnet":
        return garnet_mdp(GarnetSpec(o.garnet_states, o.garnet_actions, o.garnet_branching,
                                     o.garnet_seed, o.gamma))
    raise UsageError("give --mdp FILE or --source {tight,dynloc,garnet}")


def cmd_solve(o) -> int:
    m = parse_m(o.m)
    mdp = _source_mdp(o, o.ell, m)
    v_star = optimal_value(mdp)
    rows = []

    def row(k, v, loss):
        gap = max_norm_distance(v, v_star)
        res = max_norm_distance(optimality_op(mdp, v), v)
        rows.append([o.method, k, fmt(gap), fmt(res), "" if loss is None else fmt(loss)])

    if o.method == "vi":
        values = reference_vi(mdp, np.zeros(mdp.num_states), o.iterations)
        row(0, values[0], None)
        for k in range(1, len(values)):
            pi = greedy_policy(mdp, values[k - 1])
            row(k, values[k], max_norm_distance(v_star, evaluate_stationary(mdp, pi)))
    elif o.method == "pi":
        pi0 = greedy_policy(mdp, np.zeros(mdp.num_states))
        _, _, history = reference_pi(mdp, pi0, return_history=True)
        for k, pi in enumerate(history):
            v = evaluate_stationary(mdp, pi)
            row(k, v, max_norm_distance(v_star, v))
    elif o.method == "nsmpi":
        cfg = NsmpiConfig(m=m, ell=o.ell, iterations=o.iterations)
        records = nsmpi_run(mdp, cfg, v_star=v_star)
        for rec in records:
            row(rec.k, rec.value, rec.loss_sup)
        if o.trace:
            Path(o.trace).write_text(json.dumps(run_trace(cfg, records)))
    else:
        raise UsageError(f"unknown method {o.method!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["method", "k", "value_gap", "bellman_residual", "loss_sup"])
    w.writerows(rows)
    _write(buf.getvalue(), o.out)
    log.info("%s: %d rows, final loss %s", o.method, len(rows), rows[-1][-1])
    return EXIT_OK


def cmd_tight(o) -> int:
    spec = TightInstanceSpec(o.ell, parse_m(o.m), o.epsilon, o.gamma, o.iterations,
                             o.num_states)
    report = verify_tight_trajectory(spec)
    _write(report.to_csv(), o.out)
    log.info("tight ell=%d m=%s: trajectory_ok=%s tight_ok=%s", spec.ell, format_m(spec.m),
             report.trajectory_ok, report.tight_ok)
    return EXIT_OK if report.success else EXIT_FAIL


def _sweep_config(o) -> SweepConfig:
    return SweepConfig(
        source=o.source, ell_grid=_int_list(o.ell_grid), m_grid=_m_list(o.m_grid),
        epsilon=o.epsilon, gamma=o.gamma, iterations=o.iterations, runs=o.runs, seed=o.seed,
        n=o.n, garnet_states=o.garnet_states, garnet_actions=o.garnet_actions,
        garnet_branching=o.garnet_branching, garnet_seed=o.garnet_seed,
        budgets=_int_list(o.budgets), timing=bool(o.timing), jobs=o.jobs,
    )


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["ell", "m", "initial_loss_mean", "plateau_loss_mean", "converged_at"])
    for (ell, m), curve in mean_curves(rows).items():
        s = summarize_curve(curve)
        w.writerow([ell, format_m(m), fmt(s.initial), fmt(s.plateau), s.converged_at])
    return buf.getvalue()


def cmd_sweep(o) -> int:
    cfg = _sweep_config(o)
    rows = run_sweep(cfg)
    _write(rows_to_csv(rows), o.out)
    if o.summary:
        _write(summary_csv(rows), o.summary)
    log.info("sweep: %d cells, %d rows", len(cfg.cells), len(rows))
    return EXIT_OK


def cmd_gen_garnet(o) -> int:
    mdp = garnet_mdp(GarnetSpec(o.states, o.actions, o.branching, o.seed, o.gamma, o.sparsity))
    _write(mdp.to_json(), o.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "tight": cmd_tight,
    "sweep": cmd_sweep,
    "bench-dynloc": cmd_sweep,
    "gen-garnet": cmd_gen_garnet,
}


def _add_sources(p):
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n", type=int, help="dynamic-location sites")
    p.add_argument("--garnet-states", type=int)
    p.add_argument("--garnet-actions", type=int)
    p.add_argument("--garnet-branching", type=int)
    p.add_argument("--garnet-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsmpi", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def new(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="TOML or JSON file with option values")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        return p

    p = new("solve", "exact VI / PI / NSMPI with per-iteration CSV")
    p.add_argument("--mdp", help="MDP JSON file")
    p.add_argument("--source", choices=["tight", "dynloc", "garnet"])
    p.add_argument("--method", choices=["vi", "pi", "nsmpi"])
    p.add_argument("--m")
    p.add_argument("--ell", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--trace", help="write the NSMPI run as a JSON trace")
    _add_sources(p)

    p = new("tight", "verify the adversarial trajectory and bound equality")
    p.add_argument("--ell", type=int)
    p.add_argument("--m")
    p.add_argument("--iterations", type=int)
    p.add_argument("--num-states", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)

    for name, help in [("sweep", "seeded (ell, m) sweep with uniform errors"),
                       ("bench-dynloc", "sweep on the dynamic-location problem")]:
        p = new(name, help)
        p.add_argument("--source", help="dynloc | tight | garnet | MDP JSON path")
        p.add_argument("--ell-grid", help="comma list, e.g. 1,2,5,10")
        p.add_argument("--m-grid", help="comma list, 'inf' allowed")
        p.add_argument("--budgets", help="fixed-budget mode: comma list of ell*m products")
        p.add_argument("--iterations", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--timing", action="store_true", default=None,
                       help="fill the seconds column (makes output non-reproducible)")
        p.add_argument("--summary", help="write per-cell plateau/convergence CSV here")
        _add_sources(p)

    p = new("gen-garnet", "write a random Garnet MDP as JSON")
    p.add_argument("--states", type=int)
    p.add_argument("--actions", type=int)
    p.add_argument("--branching", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sparsity", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        opts = _resolve(args)
        return COMMANDS[args.command](opts)
    except (InvalidInput, UsageError, OSError, ValueError) as exc:
        print(f"nsmpi {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceFailure as exc:
        print(f"nsmpi {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
