"""The chain MDP on which the non-stationary MPI bound is attained with equality.

States are numbered 1..N as in the construction and stored at index i - 1.
Action 0 is "right" (jump i -> i + l - 1 with reward r_i) and action 1 is
"left" (i -> i - 1, reward 0); state 1 is absorbing with zero reward. Putting
"right" at index 0 makes lowest-index tie-breaking pick it on the exact tie
that occurs at state k + 1, which reproduces the adversarial trajectory.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bounds import BoundInputs, theorem2_bound
from .dp import INF, NsmpiConfig, nsmpi_run, parse_m
from .mdp import FiniteMdp, InvalidInput

RIGHT = 0
LEFT = 1
VALUE_TOL = 1e-9
# Exact ties at state k+1 must survive round-off; genuine gaps are far larger.
TIE_TOL = 1e-10


def min_states(ell: int, m, max_iterations: int) -> int:
    m_eff = 0 if m == INF else m
    return max_iterations + (max_iterations * m_eff + 1) * ell + 2


@dataclass(frozen=True)
class TightInstanceSpec:
    ell: int
    m: int | float
    epsilon: float
    gamma: float
    max_iterations: int
    num_states: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", parse_m(self.m))
        if self.ell < 1 or self.max_iterations < 1:
            raise InvalidInput("ell and max_iterations must be >= 1")
        if self.epsilon < 0:
            raise InvalidInput("epsilon must be non-negative")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInput("gamma must lie in (0, 1)")
        need = min_states(self.ell, self.m, self.max_iterations)
        if self.num_states is None:
            object.__setattr__(self, "num_states", need)
        elif self.num_states < need:
            raise InvalidInput(f"num_states={self.num_states} is below the required {need}")

    @property
    def N(self) -> int:
        return self.num_states


def tight_reward(i: int, gamma: float, epsilon: float) -> float:
    """r_i = -2 eps (g - g^i) / (1 - g); zero at state 1."""
    return -2.0 * epsilon * (gamma - gamma**i) / (1.0 - gamma)


def build_tight_mdp(spec: TightInstanceSpec) -> FiniteMdp:
    N, ell = spec.N, spec.ell
    rows, cols = [], []
    R = np.zeros((N, 2))
    for i in range(1, N + 1):
        s = i - 1
        if i == 1:
            right, left = 1, 1
        else:
            right = i + ell - 1 if i + ell - 1 <= N else i
            left = i - 1
            R[s, RIGHT] = tight_reward(i, spec.gamma, spec.epsilon)
        rows += [2 * s + RIGHT, 2 * s + LEFT]
        cols += [right - 1, left - 1]
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * N, N))
    return FiniteMdp(N, 2, P, R, spec.gamma)


def tight_error_schedule(k: int, spec: TightInstanceSpec) -> np.ndarray:
    """-eps at state k, +eps at state k + l, zero elsewhere."""
    if not 1 <= k <= spec.max_iterations:
        raise InvalidInput(f"iteration {k} outside 1..{spec.max_iterations}")
    e = np.zeros(spec.N)
    e[k - 1] = -spec.epsilon
    e[k + spec.ell - 1] = spec.epsilon
    return e


@dataclass(frozen=True)
class TightErrorSchedule:
    spec: TightInstanceSpec

    @property
    def epsilon(self) -> float:
        return self.spec.epsilon

    def draw(self, k: int, num_states: int) -> np.ndarray:
        if num_states != self.spec.N:
            raise InvalidInput("schedule and MDP disagree on the number of states")
        return tight_error_schedule(k, self.spec)


def tight_value_closed_form(k: int, i: int, spec: TightInstanceSpec) -> float:
    """Closed-form v_k(i) along the adversarial trajectory (finite m only)."""
    m, ell, g, eps = spec.m, spec.ell, spec.gamma, spec.epsilon
    if m == INF:
        raise InvalidInput("closed forms are only available for finite m")
    if k < 1 or not 1 <= i <= spec.N:
        raise InvalidInput(f"bad (k, i) = ({k}, {i})")
    c = ell * m + 1
    G = g**ell

    def r(j):
        return tight_reward(j, g, eps)

    def tail(a):
        # sum_{j=a}^{m} G^j
        return (G**a - G ** (m + 1)) / (1.0 - G)

    def jump_value(n):
        # state k + n*l, 1 <= n <= (k-1)m + 1
        if m == 0:
            if n != 1:
                raise AssertionError("m = 0 leaves only the first jump state in range")
            q, p = 0, 0
        else:
            q, p = divmod(n - 1, m)
        inner = sum(g ** (j * c) * (tail(1) * r(k - q - j) + eps) for j in range(1, k - q))
        return g ** (q * c) * (tail(p + 1) * r(k - q) + (eps if p == 0 else 0.0) + inner)

    frontier = k + ((k - 1) * m + 1) * ell
    if i < k:
        return -(g ** ((k - 1) * c)) * eps
    if i == k:
        return jump_value(1) + r(k) - 2.0 * eps
    if i > frontier:
        return 0.0
    q, p = divmod(i - k, ell)
    if p == 0:
        return jump_value(q)
    if q <= (k - 1) * m - 1:
        return -(g ** ((k - 1) * c)) * eps
    if q == (k - 1) * m:
        return 0.0
    raise AssertionError(f"state {i} not covered at iteration {k}")


def tight_value_vector(k: int, spec: TightInstanceSpec) -> np.ndarray:
    return np.array([tight_value_closed_form(k, i, spec) for i in range(1, spec.N + 1)])


def tight_policy_closed_form(k: int, i: int) -> int:
    """pi_k takes "right" exactly at state k."""
    return RIGHT if i == k else LEFT


def loop_loss(k: int, spec: TightInstanceSpec) -> float:
    """|v_{pi_{k,l}}(k)| = 2 eps (g - g^k) / ((1 - g)(1 - g^l))."""
    g = spec.gamma
    return 2.0 * spec.epsilon * (g - g**k) / ((1.0 - g) * (1.0 - g**spec.ell))


@dataclass
class VerificationRow:
    k: int
    max_value_dev: float
    # None when the closed-form policy does not apply (m = inf or eps = 0)
    policy_match: bool | None
    loss: float
    bound: float
    ratio: float
    argmax_state: int


@dataclass
class VerificationReport:
    spec: TightInstanceSpec
    rows: list = field(default_factory=list)

    @property
    def trajectory_ok(self) -> bool:
        """Simulated values and policies agree with the closed forms where they apply."""
        return all(
            (r.policy_match is None or r.policy_match)
            and (np.isnan(r.max_value_dev) or r.max_value_dev <= VALUE_TOL)
            for r in self.rows
        )

    @property
    def tight_ok(self) -> bool:
        """Loss equals the bound at every iteration."""
        return all(abs(r.loss - r.bound) <= VALUE_TOL for r in self.rows)

    @property
    def success(self) -> bool:
        return self.trajectory_ok and self.tight_ok

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["k", "max_value_dev", "policy_match", "loss", "bound", "ratio"])
        for r in self.rows:
            match = "" if r.policy_match is None else int(r.policy_match)
            w.writerow([r.k, f"{r.max_value_dev:.17g}", match, f"{r.loss:.17g}",
                        f"{r.bound:.17g}", f"{r.ratio:.17g}"])
        return buf.getvalue()


def verify_tight_trajectory(spec: TightInstanceSpec) -> VerificationReport:
    """Simulate NSMPI on the chain and compare with the closed forms and the bound."""
    mdp = build_tight_mdp(spec)
    N = spec.N
    all_left = np.full(N, LEFT)
    cfg = NsmpiConfig(
        m=spec.m, ell=spec.ell, iterations=spec.max_iterations, v0=np.zeros(N),
        initial_policies=[all_left] * (spec.ell - 1),
        error_model=TightErrorSchedule(spec), tie_tol=TIE_TOL,
    )
    v_star = np.zeros(N)
    records = nsmpi_run(mdp, cfg, v_star=v_star)
    report = VerificationReport(spec)
    states = np.arange(1, N + 1)
    for rec in records:
        if spec.m == INF:
            # the truncated chain is not exact for m = inf: values reach the boundary
            dev, match = math.nan, None
        else:
            dev = float(np.max(np.abs(rec.value - tight_value_vector(rec.k, spec))))
            if spec.epsilon == 0:
                # every action ties, so no policy is singled out
                match = None
            else:
                expected_pi = np.array([tight_policy_closed_form(rec.k, i) for i in states])
                match = bool(np.array_equal(rec.policy[1:], expected_pi[1:]))
        bound = theorem2_bound(BoundInputs(spec.gamma, spec.ell, rec.k, spec.epsilon, 0.0))
        if bound > 0:
            ratio = rec.loss_sup / bound
        else:
            ratio = 1.0 if rec.loss_sup == 0 else math.inf
        argmax = int(np.argmax(np.abs(v_star - rec.periodic_value))) + 1
        report.rows.append(VerificationRow(rec.k, dev, match, rec.loss_sup, bound, ratio, argmax))
    return report
