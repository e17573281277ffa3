"""Non-stationary modified policy iteration on finite MDPs."""
from .bounds import (
    BoundInputs,
    Diagnostics,
    check_bound_satisfaction,
    compute_diagnostics,
    horizon_constant,
    theorem1_bound,
    theorem2_bound,
)
from .benchmarks import (
    DynamicLocationSpec,
    GarnetSpec,
    UniformErrorModel,
    draw_error,
    dynamic_location_mdp,
    garnet_mdp,
)
from .dp import (
    INF,
    ConvergenceFailure,
    IterationRecord,
    NsmpiConfig,
    ZeroError,
    evaluate_periodic,
    evaluate_stationary,
    nsmpi_run,
    optimal_value,
    reference_pi,
    reference_vi,
)
from .mdp import (
    FiniteMdp,
    InvalidInput,
    PeriodicPolicy,
    apply_bellman_op,
    greedy_policy,
    max_norm_distance,
)
from .tight import (
    TightInstanceSpec,
    build_tight_mdp,
    tight_error_schedule,
    tight_policy_closed_form,
    tight_value_closed_form,
    verify_tight_trajectory,
)

__version__ = "0.1.0"
