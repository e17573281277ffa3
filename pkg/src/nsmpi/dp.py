"""Policy evaluation, non-stationary MPI and the exact VI/PI references."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .mdp import (
    FiniteMdp,
    InvalidInput,
    PeriodicPolicy,
    apply_bellman_op,
    check_policy,
    check_value,
    greedy_policy,
    max_norm_distance,
)

INF = math.inf
DIRECT_SOLVE_MAX_STATES = 2000
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 1_000_000


class ConvergenceFailure(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def parse_m(m) -> int | float:
    """Normalize the MPI evaluation depth: a non-negative int, or ``math.inf``."""
    if isinstance(m, str):
        if m.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        m = int(m)
    if isinstance(m, float) and math.isinf(m) and m > 0:
        return INF
    if isinstance(m, (bool, np.bool_)) or int(m) != m or m < 0:
        raise InvalidInput(f"m must be a non-negative integer or inf, got {m!r}")
    return int(m)


def format_m(m) -> str:
    return "inf" if m == INF else str(int(m))


class ErrorModel(Protocol):
    def draw(self, k: int, num_states: int) -> np.ndarray: ...


@dataclass(frozen=True)
class ZeroError:
    epsilon: float = 0.0

    def draw(self, k: int, num_states: int) -> np.ndarray:
        return np.zeros(num_states)


class _PolicyOps:
    """Per-run cache of (r_pi, P_pi) for the stationary policies seen so far."""

    def __init__(self, mdp: FiniteMdp, dense: bool):
        self.mdp = mdp
        self.dense = dense
        self._cache = {}

    def __call__(self, policy):
        pi = check_policy(self.mdp, policy)
        key = pi.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            P = self.mdp.policy_kernel(pi)
            if self.dense:
                P = P.toarray()
            hit = (self.mdp.policy_reward(pi), P)
            self._cache[key] = hit
        return hit

    def apply(self, policy, v):
        r, P = self(policy)
        return r + self.mdp.discount * (P @ v)

    def apply_periodic(self, periodic: PeriodicPolicy, v):
        # T_{pi_1} T_{pi_2} ... T_{pi_l} v: the last member acts on v first
        for pi in reversed(periodic.cycle):
            v = self.apply(pi, v)
        return v

    def composite(self, periodic: PeriodicPolicy):
        """Composite reward and discounted kernel of the l-step operator."""
        gamma = self.mdp.discount
        R = None
        K = None
        for pi in reversed(periodic.cycle):
            r, P = self(pi)
            R = r.copy() if R is None else r + gamma * (P @ R)
            K = P if K is None else P @ K
        if not isinstance(K, np.ndarray):
            K = K.toarray()
        return R, gamma ** periodic.ell * K


def _fixed_point(step, v, tolerance, max_iters, what):
    res = INF
    for _ in range(max_iters):
        nxt = step(v)
        res = max_norm_distance(nxt, v)
        v = nxt
        if res <= tolerance:
            return v
    raise ConvergenceFailure(f"{what} did not converge in {max_iters} sweeps", res)


def _use_direct(mdp, method, direct_threshold):
    if method not in ("auto", "direct", "iterative"):
        raise InvalidInput(f"unknown evaluation method {method!r}")
    if method == "auto":
        return mdp.num_states <= direct_threshold
    return method == "direct"


def evaluate_stationary(
    mdp: FiniteMdp,
    policy,
    tolerance: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    method: str = "auto",
    direct_threshold: int = DIRECT_SOLVE_MAX_STATES,
    _ops: _PolicyOps | None = None,
) -> np.ndarray:
    """Value of a stationary policy.

    ``method="direct"`` solves ``(I - gamma P_pi) v = r_pi``; ``"iterative"``
    applies ``T_pi`` until successive iterates differ by at most ``tolerance``.
    ``"auto"`` picks the direct solve up to ``direct_threshold`` states.
    """
    direct = _use_direct(mdp, method, direct_threshold)
    ops = _ops or _PolicyOps(mdp, dense=direct)
    if direct:
        r, P = ops(policy)
        if not isinstance(P, np.ndarray):
            P = P.toarray()
        return np.linalg.solve(np.eye(mdp.num_states) - mdp.discount * P, r)
    return _fixed_point(
        lambda v: ops.apply(policy, v), np.zeros(mdp.num_states), tolerance, max_iters,
        "stationary evaluation",
    )


def evaluate_periodic(
    mdp: FiniteMdp,
    policy: PeriodicPolicy,
    tolerance: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    method: str = "auto",
    direct_threshold: int = DIRECT_SOLVE_MAX_STATES,
    _ops: _PolicyOps | None = None,
) -> np.ndarray:
    """Phase-0 value of a periodic policy: fixed point of ``T_{pi_1} ... T_{pi_l}``."""
    if not isinstance(policy, PeriodicPolicy):
        policy = PeriodicPolicy(tuple(policy))
    if policy.ell == 1:
        return evaluate_stationary(mdp, policy.cycle[0], tolerance, max_iters, method,
                                   direct_threshold, _ops)
    direct = _use_direct(mdp, method, direct_threshold)
    ops = _ops or _PolicyOps(mdp, dense=direct)
    if direct:
        R, M = ops.composite(policy)
        return np.linalg.solve(np.eye(mdp.num_states) - M, R)
    return _fixed_point(
        lambda v: ops.apply_periodic(policy, v), np.zeros(mdp.num_states), tolerance,
        max_iters, "periodic evaluation",
    )


@dataclass
class NsmpiConfig:
    m: int | float
    ell: int = 1
    iterations: int = 10
    v0: np.ndarray | None = None
    initial_policies: Sequence | None = None
    error_model: ErrorModel = field(default_factory=ZeroError)
    eval_tolerance: float = DEFAULT_TOL
    eval_max_iters: int = DEFAULT_MAX_ITERS
    direct_threshold: int = DIRECT_SOLVE_MAX_STATES
    tie_tol: float = 0.0
    diagnostics: bool = False

    def __post_init__(self):
        self.m = parse_m(self.m)
        if int(self.ell) != self.ell or self.ell < 1:
            raise InvalidInput(f"ell must be a positive integer, got {self.ell!r}")
        self.ell = int(self.ell)
        if self.iterations < 1:
            raise InvalidInput("iterations must be positive")
        if self.initial_policies is not None and len(self.initial_policies) != self.ell - 1:
            raise InvalidInput(
                f"expected {self.ell - 1} initial policies for ell={self.ell}, "
                f"got {len(self.initial_policies)}"
            )


@dataclass
class IterationRecord:
    k: int
    value: np.ndarray
    policy: np.ndarray
    periodic: PeriodicPolicy
    periodic_value: np.ndarray
    error: np.ndarray
    loss_sup: float | None = None
    loss_mean: float | None = None
    diagnostics: object | None = None
    # True when the cycle still contains default-padded initial policies
    default_padding: bool = False
    # wall-clock seconds since the start of the run
    seconds: float = 0.0


def nsmpi_run(mdp: FiniteMdp, config: NsmpiConfig, v_star=None) -> list[IterationRecord]:
    """Run non-stationary MPI with parameters (m, ell) for ``config.iterations`` steps.

    Iteration k computes ``pi_{k+1} = greedy(v_k)`` and
    ``v_{k+1} = (T_{pi_{k+1,l}})^m T_{pi_{k+1}} v_k + eps_{k+1}`` where the error
    is drawn from ``config.error_model`` at index k+1. Returns one record per
    k = 1..K holding ``v_k``, ``pi_k``, ``pi_{k,l}`` and ``v_{pi_{k,l}}``.
    """
    cfg = config
    S = mdp.num_states
    v = np.zeros(S) if cfg.v0 is None else check_value(mdp, cfg.v0).copy()
    if v_star is not None:
        v_star = check_value(mdp, v_star)
    direct = S <= cfg.direct_threshold
    ops = _PolicyOps(mdp, dense=direct)
    eval_kw = dict(tolerance=cfg.eval_tolerance, max_iters=cfg.eval_max_iters,
                   direct_threshold=cfg.direct_threshold, _ops=ops)

    # history[0] is the newest policy; starts as pi_0, pi_{-1}, ..., pi_{-l+2}
    defaulted = cfg.initial_policies is None
    if defaulted:
        history = [greedy_policy(mdp, v, cfg.tie_tol)] * (cfg.ell - 1)
    else:
        history = [check_policy(mdp, p).copy() for p in cfg.initial_policies]
    if cfg.diagnostics and v_star is None:
        raise InvalidInput("diagnostics require the optimal value v_star")

    records = []
    prev_error = np.zeros(S)
    start = time.perf_counter()
    for k in range(cfg.iterations):
        pi = greedy_policy(mdp, v, cfg.tie_tol)
        history = [pi] + history[: cfg.ell - 1]
        periodic = PeriodicPolicy(tuple(history))
        periodic_value = evaluate_periodic(mdp, periodic, **eval_kw)

        if cfg.diagnostics and records:
            from .bounds import compute_diagnostics

            last = records[-1]
            last.diagnostics = compute_diagnostics(
                mdp, v, pi, periodic, last.periodic, prev_error, v_star,
                periodic_value=last.periodic_value, _ops=ops,
            )

        if cfg.m == INF:
            u = periodic_value.copy()
        else:
            u = ops.apply(pi, v)
            for _ in range(cfg.m):
                u = ops.apply_periodic(periodic, u)
        eps = np.asarray(cfg.error_model.draw(k + 1, S), dtype=float)
        if eps.shape != (S,):
            raise InvalidInput(f"error model returned shape {eps.shape}, expected ({S},)")
        v = u + eps
        prev_error = eps

        rec = IterationRecord(
            k=k + 1, value=v, policy=pi, periodic=periodic, periodic_value=periodic_value,
            error=eps, default_padding=defaulted and k + 1 < cfg.ell,
            seconds=time.perf_counter() - start,
        )
        if v_star is not None:
            gap = v_star - periodic_value
            rec.loss_sup = float(np.max(np.abs(gap)))
            rec.loss_mean = float(np.mean(gap))
        records.append(rec)

    if cfg.diagnostics and records:
        from .bounds import compute_diagnostics

        pi = greedy_policy(mdp, v, cfg.tie_tol)
        periodic = PeriodicPolicy(tuple(([pi] + history)[: cfg.ell]))
        last = records[-1]
        last.diagnostics = compute_diagnostics(
            mdp, v, pi, periodic, last.periodic, prev_error, v_star,
            periodic_value=last.periodic_value, _ops=ops,
        )
    return records


def reference_vi(mdp: FiniteMdp, v0, K: int) -> list[np.ndarray]:
    """Exact value iteration; returns ``[v_0, v_1, ..., v_K]``."""
    v = check_value(mdp, v0).copy()
    out = [v]
    for _ in range(K):
        v = apply_bellman_op(mdp, greedy_policy(mdp, v), v)
        out.append(v)
    return out


def reference_pi(mdp: FiniteMdp, pi0, max_iters: int = 1000, return_history: bool = False):
    """Exact policy iteration from ``pi0`` until the greedy policy stops changing.

    Returns ``(policy, value)``; with ``return_history`` also the list of
    policies visited, starting with ``pi0``.
    """
    pi = check_policy(mdp, pi0).copy()
    history = [pi]
    for _ in range(max_iters):
        v = evaluate_stationary(mdp, pi)
        nxt = greedy_policy(mdp, v)
        if np.array_equal(nxt, pi):
            return (pi, v, history) if return_history else (pi, v)
        pi = nxt
        history.append(pi)
    raise ConvergenceFailure(f"policy iteration did not terminate in {max_iters} steps", INF)


def optimal_value(mdp: FiniteMdp) -> np.ndarray:
    """v* by exact policy iteration started from the greedy policy of 0."""
    _, v = reference_pi(mdp, greedy_policy(mdp, np.zeros(mdp.num_states)))
    return v


def run_trace(config: NsmpiConfig, records) -> dict:
    """JSON-ready ``{config, records}`` snapshot of a run (timings excluded)."""

    def opt(x):
        return None if x is None else float(x)

    return {
        "config": {
            "m": format_m(config.m),
            "ell": config.ell,
            "iterations": config.iterations,
            "eval_tolerance": config.eval_tolerance,
            "tie_tol": config.tie_tol,
            "error_model": repr(config.error_model),
        },
        "records": [
            {
                "k": r.k,
                "value": r.value.tolist(),
                "policy": r.policy.tolist(),
                "periodic": [p.tolist() for p in r.periodic.cycle],
                "periodic_value": r.periodic_value.tolist(),
                "error": r.error.tolist(),
                "loss_sup": opt(r.loss_sup),
                "loss_mean": opt(r.loss_mean),
            }
            for r in records
        ],
    }
