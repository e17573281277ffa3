"""Finite MDPs, deterministic policies and Bellman operators.

Transitions are kept as one CSR matrix with ``num_states * num_actions`` rows
(row ``s * num_actions + a`` is the distribution of the next state after taking
``a`` in ``s``). Rewards are the expected immediate reward ``r(s, a)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

ROW_TOL = 1e-12


class InvalidInput(ValueError):
    """Raised for malformed MDPs, policies or value vectors."""


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    num_states: int
    num_actions: int
    transitions: sp.csr_matrix
    rewards: np.ndarray
    discount: float
    _dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        S, A = self.num_states, self.num_actions
        if S < 1 or A < 1:
            raise InvalidInput("need at least one state and one action")
        if not 0.0 < self.discount < 1.0:
            raise InvalidInput(f"discount must lie in (0, 1), got {self.discount}")
        P = sp.csr_matrix(self.transitions, dtype=float)
        if P.shape != (S * A, S):
            raise InvalidInput(f"transition matrix has shape {P.shape}, expected {(S * A, S)}")
        P.sum_duplicates()
        P.sort_indices()
        if P.nnz and (P.data.min() < 0 or not np.all(np.isfinite(P.data))):
            raise InvalidInput("transition probabilities must be finite and non-negative")
        sums = np.asarray(P.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            s, a = divmod(int(bad[0]), A)
            raise InvalidInput(f"row (s={s}, a={a}) sums to {sums[bad[0]]!r}")
        r = np.array(self.rewards, dtype=float)
        if r.shape != (S, A):
            raise InvalidInput(f"rewards have shape {r.shape}, expected {(S, A)}")
        if not np.all(np.isfinite(r)):
            raise InvalidInput("rewards must be finite")
        P.data.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "discount", float(self.discount))

    @classmethod
    def from_dense(cls, P, R, discount):
        """Build from a dense ``(S, A, S)`` kernel and ``(S, A)`` rewards."""
        P = np.asarray(P, dtype=float)
        S, A, S2 = P.shape
        if S != S2:
            raise InvalidInput(f"kernel shape {P.shape} is not (S, A, S)")
        return cls(S, A, sp.csr_matrix(P.reshape(S * A, S)), np.asarray(R, dtype=float), discount)

    def dense_kernel(self) -> np.ndarray:
        """Dense ``(S, A, S)`` view of the transitions (cached)."""
        if self._dense is None:
            D = self.transitions.toarray().reshape(self.num_states, self.num_actions, self.num_states)
            D.flags.writeable = False
            object.__setattr__(self, "_dense", D)
        return self._dense

    def row(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        """(next_states, probabilities) of the (s, a) transition row."""
        P = self.transitions
        i = s * self.num_actions + a
        lo, hi = P.indptr[i], P.indptr[i + 1]
        return P.indices[lo:hi], P.data[lo:hi]

    def policy_rows(self, policy) -> np.ndarray:
        pi = check_policy(self, policy)
        return np.arange(self.num_states) * self.num_actions + pi

    def policy_kernel(self, policy) -> sp.csr_matrix:
        """P_pi as an (S, S) sparse matrix."""
        return self.transitions[self.policy_rows(policy)]

    def policy_reward(self, policy) -> np.ndarray:
        pi = check_policy(self, policy)
        return self.rewards[np.arange(self.num_states), pi]

    def q_values(self, v) -> np.ndarray:
        """One-step action values r(s, a) + gamma * sum_s' P(s'|s, a) v(s')."""
        v = check_value(self, v)
        return self.rewards + self.discount * (self.transitions @ v).reshape(self.num_states, self.num_actions)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        S, A = self.num_states, self.num_actions
        transitions = []
        for s in range(S):
            per_action = []
            for a in range(A):
                idx, prob = self.row(s, a)
                per_action.append([[int(j), float(p)] for j, p in zip(idx, prob)])
            transitions.append(per_action)
        return {
            "num_states": S,
            "num_actions": A,
            "discount": self.discount,
            "rewards": self.rewards.tolist(),
            "transitions": transitions,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FiniteMdp:
        try:
            S = int(doc["num_states"])
            A = int(doc["num_actions"])
            discount = float(doc["discount"])
            rewards = np.asarray(doc["rewards"], dtype=float)
            rows, cols, vals = [], [], []
            trans = doc["transitions"]
            if len(trans) != S:
                raise InvalidInput(f"expected {S} transition entries, got {len(trans)}")
            for s, per_action in enumerate(trans):
                if len(per_action) != A:
                    raise InvalidInput(f"state {s}: expected {A} actions, got {len(per_action)}")
                for a, entries in enumerate(per_action):
                    if not entries:
                        raise InvalidInput(f"state {s}, action {a}: empty transition row")
                    for j, p in entries:
                        j = int(j)
                        if not 0 <= j < S:
                            raise InvalidInput(f"state {s}, action {a}: next state {j} out of range")
                        rows.append(s * A + a)
                        cols.append(j)
                        vals.append(float(p))
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed MDP document: {exc!r}") from exc
        P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
        return cls(S, A, P, rewards, discount)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> FiniteMdp:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidInput("MDP document must be a JSON object")
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> FiniteMdp:
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class PeriodicPolicy:
    """Cycle of stationary policies, newest first: ``cycle[0]`` acts first."""

    cycle: tuple

    def __post_init__(self):
        if len(self.cycle) < 1:
            raise InvalidInput("a periodic policy needs at least one member")
        members = tuple(np.asarray(p, dtype=np.int64) for p in self.cycle)
        n = members[0].shape
        if any(p.shape != n or p.ndim != 1 for p in members):
            raise InvalidInput("all member policies must be 1-d and of the same length")
        for p in members:
            p.flags.writeable = False
        object.__setattr__(self, "cycle", members)

    @property
    def ell(self) -> int:
        return len(self.cycle)

    def __eq__(self, other):
        if not isinstance(other, PeriodicPolicy) or other.ell != self.ell:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.cycle, other.cycle))

    __hash__ = None


def check_value(mdp: FiniteMdp, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise InvalidInput(f"value vector has shape {v.shape}, expected ({mdp.num_states},)")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("value vector has non-finite entries")
    return v


def check_policy(mdp: FiniteMdp, policy) -> np.ndarray:
    pi = np.asarray(policy)
    if pi.shape != (mdp.num_states,) or not np.issubdtype(pi.dtype, np.integer):
        raise InvalidInput(f"policy must be an integer vector of length {mdp.num_states}")
    if pi.size and (pi.min() < 0 or pi.max() >= mdp.num_actions):
        raise InvalidInput("policy selects an action outside [0, num_actions)")
    return pi


def apply_bellman_op(mdp: FiniteMdp, policy, v) -> np.ndarray:
    """T_pi v = r_pi + gamma P_pi v."""
    v = check_value(mdp, v)
    rows = mdp.policy_rows(policy)
    return mdp.policy_reward(policy) + mdp.discount * (mdp.transitions[rows] @ v)


def greedy_policy(mdp: FiniteMdp, v, tie_tol: float = 0.0) -> np.ndarray:
    """Per state, the lowest-index action maximizing the one-step action value.

    With ``tie_tol > 0`` every action within ``tie_tol`` of the maximum counts as
    tied, which makes the choice robust to round-off on exact ties.
    """
    q = mdp.q_values(v)
    if tie_tol <= 0.0:
        return np.argmax(q, axis=1)
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tie_tol, axis=1)


def optimality_op(mdp: FiniteMdp, v) -> np.ndarray:
    """T v = max_pi T_pi v."""
    return mdp.q_values(v).max(axis=1)


def max_norm_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))
