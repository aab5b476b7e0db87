"""kinopt: feedback-controlled opinion consensus toolkit.

Three cross-validated layers: the N-agent microscopic dynamic with a
receding-horizon feedback controller, a binary-collision Monte Carlo solver
for the corresponding kinetic description, and the analytic small-interaction
limit (moment ODEs and stationary densities).
"""

from .model import (
    CompromiseFunction,
    ControlParams,
    ControlWeight,
    DiffusionFunction,
    ModelSpec,
    MomentTrace,
    NoiseModel,
    OpinionEnsemble,
    ScalingParams,
    ValidationReport,
    validate_spec,
)
from .micro import (
    BoundViolation,
    BracketFailure,
    ControlRecord,
    MicroState,
    brute_force_control,
    explicit_control,
    run_micro,
    step_micro,
    step_micro_q,
)
from .kinetic import (
    BinaryRule,
    BoundReport,
    PairingError,
    check_bounds_conditions,
    collide,
    dsmc_step,
    run_dsmc,
)
from .fokker_planck import (
    ClosureUnavailable,
    ConditionUnmet,
    QuadratureFailure,
    SteadyDensity,
    mean_closed_form,
    mean_limit_bounds,
    moment_ode_solve,
    steady_density,
    sznajd_exact,
    sznajd_exact_cdf,
)
from .analytics import (
    Histogram,
    cluster_centers,
    count_clusters,
    histogram,
    l1_distance,
    mean_error_l2,
)

__version__ = "0.1.0"
