"""Splitting solver for monotone variational inequalities over sublevel sets.

The solver treats VI(T, C) with T given as a sum of monotone operator
oracles and C as a sublevel set {x : c(x) <= 0} of a convex function. Exact
projections onto C are replaced by closed-form projections onto separating
halfspaces built from subgradients of c, so one outer iteration costs m
operator selections plus a handful of halfspace projections. The raw
iterates are Fejer monotone; the reported iterate is a stepsize-weighted
running average, which is the sequence that converges for merely monotone
(for example rotational) operators.

Layers: ``operators`` and ``constraints`` define the oracle interfaces,
``innerloop`` drives an infeasible point toward C through halfspace
projections, ``solver`` runs the outer iteration with traces and
diagnostics, ``problems`` ships ready-made families, ``oracle`` recomputes
everything along independent routes, ``checks`` bundles seeded sweeps, and
``cli`` exposes the batch interface.
"""

from .constraints import (
    BallSet,
    BoxSet,
    Constraint,
    ExactSet,
    GraphSet,
    Halfspace,
    WholeSpace,
    project_halfspace_pair,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    InfeasibleConstraint,
    IterationBudgetExceeded,
    NonFiniteIterate,
    NonFiniteValue,
    VisplitError,
)
from .innerloop import InnerResult, feasible_shortcut, run_inner
from .operators import (
    AffineFunction,
    AffineOperator,
    ConstantFunction,
    ConvexFunction,
    EmbeddedOperator,
    GradientOperator,
    LinearMap,
    LogSumExp,
    MaxOfAffine,
    NormFunction,
    Operator,
    Quadratic,
    ScaledOperator,
    ShiftedFunction,
    ZeroOperator,
    sum_select,
)
from .oracle import (
    AuditReport,
    fejer_audit,
    grid_vi_solution,
    qp_project,
    reference_solution,
    with_reference,
)
from .problems import (
    FAMILIES,
    build,
    build_a1,
    build_a2,
    build_a3,
    build_affine_vi_over_polyhedron,
    build_quadratic_over_ball,
)
from .solver import (
    AdaptivePowerStepsize,
    ConstantStepsize,
    CycleCheck,
    PowerStepsize,
    Problem,
    SolverState,
    StepSnapshot,
    StepsizeSchedule,
    TraceRecord,
    TRACE_COLUMNS,
    outer_step,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptivePowerStepsize",
    "AffineFunction",
    "AffineOperator",
    "AuditReport",
    "BallSet",
    "BoxSet",
    "ConfigError",
    "ConstantFunction",
    "ConstantStepsize",
    "Constraint",
    "ConvexFunction",
    "CycleCheck",
    "DimensionMismatch",
    "EmbeddedOperator",
    "ExactSet",
    "FAMILIES",
    "GradientOperator",
    "GraphSet",
    "Halfspace",
    "InfeasibleConstraint",
    "InnerResult",
    "IterationBudgetExceeded",
    "LinearMap",
    "LogSumExp",
    "MaxOfAffine",
    "NonFiniteIterate",
    "NonFiniteValue",
    "NormFunction",
    "Operator",
    "PowerStepsize",
    "Problem",
    "Quadratic",
    "ScaledOperator",
    "ShiftedFunction",
    "SolverState",
    "StepSnapshot",
    "StepsizeSchedule",
    "TRACE_COLUMNS",
    "TraceRecord",
    "VisplitError",
    "WholeSpace",
    "ZeroOperator",
    "build",
    "build_a1",
    "build_a2",
    "build_a3",
    "build_affine_vi_over_polyhedron",
    "build_quadratic_over_ball",
    "fejer_audit",
    "feasible_shortcut",
    "grid_vi_solution",
    "outer_step",
    "project_halfspace_pair",
    "qp_project",
    "reference_solution",
    "run",
    "run_inner",
    "sum_select",
    "with_reference",
    "__version__",
]
