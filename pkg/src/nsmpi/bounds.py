"""Error-propagation bounds for (non-stationary) MPI and the loss decomposition."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mdp import FiniteMdp, InvalidInput, PeriodicPolicy, check_value

SLACK_TOL = 1e-9
IDENTITY_TOL = 1e-9
HORIZON_CONSTANT_LIMIT = 3.164


@dataclass(frozen=True)
class BoundInputs:
    gamma: float
    ell: int
    k: int
    epsilon: float
    initial_gap: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInput(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.ell < 1 or self.k < 1:
            raise InvalidInput("ell and k must be >= 1")
        if self.epsilon < 0 or self.initial_gap < 0:
            raise InvalidInput("epsilon and initial_gap must be non-negative")


def theorem2_bound(inputs: BoundInputs) -> float:
    """Loss bound of the periodic policy pi_{k,l}:

        2 (g - g^k) eps / ((1 - g)(1 - g^l)) + 2 g^k ||v* - v_0|| / (1 - g)
    """
    g, k = inputs.gamma, inputs.k
    noise = 2.0 * (g - g**k) * inputs.epsilon / ((1.0 - g) * (1.0 - g**inputs.ell))
    return noise + 2.0 * g**k * inputs.initial_gap / (1.0 - g)


def theorem1_bound(inputs: BoundInputs) -> float:
    """Stationary-policy (l = 1) bound; ignores ``inputs.ell``."""
    g, k = inputs.gamma, inputs.k
    noise = 2.0 * (g - g**k) * inputs.epsilon / ((1.0 - g) * (1.0 - g))
    return noise + 2.0 * g**k * inputs.initial_gap / (1.0 - g)


def horizon_constant(gamma: float) -> tuple[int, float]:
    """Period ceil(1/(1-g)) and the resulting noise constant 2 / (1 - g^period)."""
    if not 0.0 < gamma < 1.0:
        raise InvalidInput(f"gamma must lie in (0, 1), got {gamma}")
    x = 1.0 / (1.0 - gamma)
    # absorb round-off so that e.g. gamma = 0.9 gives 10, not 11
    ell = math.ceil(x * (1.0 - 1e-12))
    return ell, 2.0 / (1.0 - gamma**ell)


@dataclass
class Diagnostics:
    residual: np.ndarray
    shift: np.ndarray
    distance: np.ndarray
    loss_vec: np.ndarray

    def identity_gap(self) -> float:
        """max |l_k - (s_k + d_k)|."""
        return float(np.max(np.abs(self.loss_vec - (self.shift + self.distance))))


def compute_diagnostics(
    mdp: FiniteMdp,
    v_k,
    pi_next,
    periodic_next: PeriodicPolicy,
    periodic_k: PeriodicPolicy,
    eps_k,
    v_star,
    periodic_value=None,
    _ops=None,
) -> Diagnostics:
    """Residual, shift, distance and loss vectors at iteration k.

    ``pi_next`` and ``periodic_next`` are pi_{k+1} and pi_{k+1,l};
    ``periodic_k`` is pi_{k,l}, whose value may be passed in precomputed.
    """
    from .dp import _PolicyOps, evaluate_periodic

    v_k = check_value(mdp, v_k)
    v_star = check_value(mdp, v_star)
    eps_k = check_value(mdp, eps_k)
    ops = _ops or _PolicyOps(mdp, dense=True)
    if periodic_value is None:
        periodic_value = evaluate_periodic(mdp, periodic_k, _ops=ops)
    t = ops.apply(pi_next, v_k)
    residual = t - ops.apply_periodic(periodic_next, t)
    shift = v_k - periodic_value - eps_k
    distance = v_star - v_k + eps_k
    loss_vec = v_star - periodic_value
    diag = Diagnostics(residual, shift, distance, loss_vec)
    if diag.identity_gap() > IDENTITY_TOL:
        raise AssertionError(f"loss != shift + distance (gap {diag.identity_gap():.3e})")
    return diag


@dataclass(frozen=True)
class BoundCheck:
    k: int
    loss: float
    bound: float
    slack: float

    @property
    def ratio(self) -> float:
        return self.loss / self.bound if self.bound > 0 else (0.0 if self.loss == 0 else math.inf)

    @property
    def violated(self) -> bool:
        return self.slack < -SLACK_TOL


def check_bound_satisfaction(records, inputs: BoundInputs) -> list[BoundCheck]:
    """Compare each record's sup-norm loss with the bound at its iteration index.

    ``inputs.k`` is ignored; every record supplies its own k.
    """
    out = []
    for rec in records:
        if rec.loss_sup is None:
            raise InvalidInput(f"record k={rec.k} has no loss (run without v_star?)")
        b = theorem2_bound(BoundInputs(inputs.gamma, inputs.ell, rec.k, inputs.epsilon,
                                       inputs.initial_gap))
        out.append(BoundCheck(rec.k, rec.loss_sup, b, b - rec.loss_sup))
    return out


def any_violation(checks) -> bool:
    return any(c.violated for c in checks)
