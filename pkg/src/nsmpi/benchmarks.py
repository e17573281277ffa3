"""Benchmark MDPs and the random error model used in the experiments.

* dynamic location: repairman/trailer problem with n sites (n^2 states, n actions);
* Garnet: seeded random MDPs with a fixed branching factor (test population,
  not part of the original experiments);
* uniform errors: every component i.i.d. uniform on [0, eps].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mdp import FiniteMdp, InvalidInput

SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class DynamicLocationSpec:
    n: int = 8
    gamma: float = 0.98

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInput(f"need at least 2 sites, got n={self.n}")


def dynloc_index(repairman: int, trailer: int, n: int) -> int:
    """State index of (s_r, s_t), both 1-based site numbers."""
    return (repairman - 1) * n + (trailer - 1)


def dynamic_location_mdp(spec: DynamicLocationSpec) -> FiniteMdp:
    n = spec.n
    S, A = n * n, n
    R = np.empty((S, A))
    rows, cols, vals = [], [], []
    for sr in range(1, n + 1):
        if sr < n:
            moves = [(s2, 1.0 / (n - sr + 1)) for s2 in range(sr, n + 1)]
        else:
            moves = [(1, 0.75), (n, 0.25)]
        for st in range(1, n + 1):
            s = dynloc_index(sr, st, n)
            for a in range(1, n + 1):
                R[s, a - 1] = -abs(sr - st) - abs(st - a) / 2.0
                for s2, p in moves:
                    rows.append(s * A + a - 1)
                    cols.append(dynloc_index(s2, a, n))
                    vals.append(p)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
    return FiniteMdp(S, A, P, R, spec.gamma)


@dataclass(frozen=True)
class GarnetSpec:
    num_states: int
    num_actions: int
    branching: int
    seed: int
    discount: float = 0.9
    # fraction of (s, a) pairs whose reward is forced to zero
    reward_sparsity: float = 0.0

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise InvalidInput("need at least one state and one action")
        if not 1 <= self.branching <= self.num_states:
            raise InvalidInput(f"branching must lie in [1, {self.num_states}]")
        if not 0.0 <= self.reward_sparsity <= 1.0:
            raise InvalidInput("reward_sparsity must lie in [0, 1]")


def garnet_mdp(spec: GarnetSpec) -> FiniteMdp:
    S, A, b = spec.num_states, spec.num_actions, spec.branching
    rng = np.random.default_rng(spec.seed & SEED_MASK)
    rows, cols, vals = [], [], []
    for i in range(S * A):
        succ = rng.choice(S, size=b, replace=False)
        probs = rng.dirichlet(np.ones(b))
        rows.extend([i] * b)
        cols.extend(succ.tolist())
        vals.extend(probs.tolist())
    R = rng.uniform(-1.0, 1.0, size=(S, A))
    R[rng.random((S, A)) < spec.reward_sparsity] = 0.0
    P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
    return FiniteMdp(S, A, P, R, spec.discount)


@dataclass(frozen=True)
class UniformErrorModel:
    """eps_k drawn i.i.d. uniform on [0, epsilon], a pure function of (seed, k)."""

    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidInput("epsilon must be non-negative")

    def draw(self, k: int, num_states: int) -> np.ndarray:
        return draw_error(self, k, num_states)


def draw_error(model: UniformErrorModel, k: int, num_states: int) -> np.ndarray:
    if model.epsilon == 0:
        return np.zeros(num_states)
    rng = np.random.default_rng([model.seed & SEED_MASK, k])
    return rng.uniform(0.0, model.epsilon, size=num_states)
