"""Seeded parameter sweeps over (ell, m) with uniform errors, emitted as long CSV."""
from __future__ import annotations

import csv
import hashlib
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchmarks import (
    SEED_MASK,
    DynamicLocationSpec,
    GarnetSpec,
    UniformErrorModel,
    dynamic_location_mdp,
    garnet_mdp,
)
from .bounds import BoundInputs, theorem2_bound
from .dp import INF, NsmpiConfig, format_m, nsmpi_run, optimal_value, parse_m
from .mdp import FiniteMdp, InvalidInput
from .tight import TightInstanceSpec, build_tight_mdp

SWEEP_COLUMNS = ["ell", "m", "run", "k", "loss_sup", "loss_mean", "bound", "seconds"]
DEFAULT_ELL_GRID = (1, 2, 5, 10)
DEFAULT_M_GRID = (1, 2, 5, 10, 25, INF)


def fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class SweepConfig:
    source: str = "dynloc"  # dynloc | tight | garnet | path to an MDP JSON file
    ell_grid: tuple = DEFAULT_ELL_GRID
    m_grid: tuple = DEFAULT_M_GRID
    epsilon: float = 4.0
    gamma: float = 0.98
    iterations: int = 150
    runs: int = 20
    seed: int = 0
    n: int = 8
    garnet_states: int = 20
    garnet_actions: int = 3
    garnet_branching: int = 3
    garnet_seed: int = 0
    # fixed-budget mode: enumerate (ell, m) with ell * m equal to each entry
    budgets: tuple = ()
    timing: bool = False
    jobs: int = 1
    cells: list = field(init=False, repr=False)

    def __post_init__(self):
        self.ell_grid = tuple(int(e) for e in self.ell_grid)
        self.m_grid = tuple(parse_m(m) for m in self.m_grid)
        self.budgets = tuple(int(b) for b in self.budgets)
        if not self.budgets and (not self.ell_grid or not self.m_grid):
            raise InvalidInput("ell and m grids must be non-empty")
        if any(e < 1 for e in self.ell_grid):
            raise InvalidInput("ell values must be >= 1")
        if self.runs < 1 or self.iterations < 1:
            raise InvalidInput("runs and iterations must be >= 1")
        if self.epsilon < 0:
            raise InvalidInput("epsilon must be non-negative")
        if any(b < 1 for b in self.budgets):
            raise InvalidInput("budgets must be positive")
        self.cells = grid_cells(self)


def grid_cells(cfg: SweepConfig) -> list[tuple[int, int | float]]:
    if cfg.budgets:
        return [(ell, b // ell) for b in cfg.budgets for ell in range(1, b + 1) if b % ell == 0]
    return [(ell, m) for ell in cfg.ell_grid for m in cfg.m_grid]


def cell_seed(base_seed: int, ell: int, m, run: int) -> int:
    """base_seed XOR a stable 64-bit hash of (ell, m, run)."""
    digest = hashlib.blake2b(f"{ell}|{format_m(m)}|{run}".encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "little")) & SEED_MASK


def build_source_mdp(cfg: SweepConfig, ell: int, m) -> FiniteMdp:
    if cfg.source == "dynloc":
        return dynamic_location_mdp(DynamicLocationSpec(cfg.n, cfg.gamma))
    if cfg.source == "garnet":
        return garnet_mdp(GarnetSpec(cfg.garnet_states, cfg.garnet_actions,
                                     cfg.garnet_branching, cfg.garnet_seed, cfg.gamma))
    if cfg.source == "tight":
        return build_tight_mdp(TightInstanceSpec(ell, m, cfg.epsilon, cfg.gamma, cfg.iterations))
    return FiniteMdp.load(cfg.source)


def run_cell(cfg: SweepConfig, ell: int, m) -> list[list]:
    """All runs of one (ell, m) cell as CSV-ready rows in (run, k) order."""
    mdp = build_source_mdp(cfg, ell, m)
    v_star = optimal_value(mdp)
    v0 = np.zeros(mdp.num_states)
    gap = float(np.max(np.abs(v_star - v0)))
    rows = []
    for run in range(cfg.runs):
        errors = UniformErrorModel(cfg.epsilon, cell_seed(cfg.seed, ell, m, run))
        records = nsmpi_run(
            mdp, NsmpiConfig(m=m, ell=ell, iterations=cfg.iterations, v0=v0, error_model=errors),
            v_star=v_star,
        )
        for rec in records:
            bound = theorem2_bound(BoundInputs(mdp.discount, ell, rec.k, cfg.epsilon, gap))
            rows.append([ell, format_m(m), run, rec.k, fmt(rec.loss_sup), fmt(rec.loss_mean),
                         fmt(bound), fmt(rec.seconds if cfg.timing else 0.0)])
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(cfg: SweepConfig) -> list[list]:
    tasks = [(cfg, ell, m) for ell, m in cfg.cells]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_cell_args, tasks))
    else:
        chunks = [run_cell(*t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows, columns=SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def mean_curves(rows, metric: str = "loss_mean") -> dict:
    """{(ell, m): run-averaged curve over k} from sweep rows."""
    col = SWEEP_COLUMNS.index(metric)
    acc = {}
    for row in rows:
        key = (int(row[0]), parse_m(row[1]))
        acc.setdefault(key, {}).setdefault(int(row[3]), []).append(float(row[col]))
    return {key: np.array([np.mean(per_k[k]) for k in sorted(per_k)]) for key, per_k in acc.items()}


@dataclass(frozen=True)
class CurveSummary:
    plateau: float
    initial: float
    converged_at: int


def summarize_curve(curve, band: float = 0.1) -> CurveSummary:
    """Plateau = mean over the second half of the iterations; convergence is the
    first iteration whose error is within ``band`` of the initial excess above it."""
    curve = np.asarray(curve, dtype=float)
    K = len(curve)
    plateau = float(curve[K // 2:].mean())
    initial = float(curve[0])
    level = plateau + band * max(initial - plateau, 0.0)
    hits = np.flatnonzero(curve <= level)
    return CurveSummary(plateau, initial, int(hits[0]) + 1 if hits.size else K + 1)


def dynloc_protocol(**overrides) -> SweepConfig:
    """Dynamic-location sweep: n=8, gamma=0.98, eps=4, 150 iterations."""
    return SweepConfig(**overrides)
