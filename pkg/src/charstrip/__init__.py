"""Characteristic-based solvers for first-order hyperbolic boundary value
problems on the strip, with dissipativity-condition checking, time-periodic
solutions, a quasilinear outer iteration, and a reproducible
loss-of-regularity experiment."""

from .boundary import (
    BoundaryOperatorSpec,
    BoundaryPlan,
    ReflectionTerm,
    TraceSet,
    apply_R,
    apply_derived,
    derived_spec,
    general_boundary,
    periodic_boundary,
    row_norm,
)
from .characteristics import Characteristic, dt_omega, trace
from .conditions import (
    ConditionReport,
    DampingRates,
    check_direct,
    check_norm_conditions,
    check_periodic_two_sided,
    check_presolve,
    compute_damping_rates,
    evaluate_conditions,
)
from .fields import (
    DiagonalSystem,
    Grid,
    GridField,
    Periodic,
    QuasilinearSystem,
    StateSnapshot,
    Window,
    diagonalize_at_state,
    read_checkpoint,
    validate_hyperbolicity,
    write_checkpoint,
    write_field_csv,
)
from .forcing import ExprRhs, ExprTimeData, SampledTimeData, ZeroRhs
from .linear_solver import (
    LinearProblem,
    SolveOptions,
    SolveReport,
    derivative_problem,
    solve_derivative_field,
    solve_linear,
    verify_periodicity,
)
from .operators import (
    OperatorAssembly,
    apply_C,
    apply_D,
    apply_F,
    estimate_operator_norms,
)
from .quasilinear_solver import (
    QuasilinearOptions,
    QuasilinearProblem,
    QuasilinearReport,
    perturbation_experiment,
    solve_quasilinear,
)
from .scenarios import (
    CounterexampleConfig,
    RunConfig,
    counterexample_scenario,
    load_config,
    run,
)

__version__ = "0.1.0"
