"""Outer iteration: relaxed projections, incremental operator cycle, averaging.

One outer step, given the current base point z_k:

1. Feasibility stage. If c(z_k) <= 0 the feasible shortcut supplies z_0 and
   a region (whole space inside C, supporting halfspace on the boundary);
   otherwise the feasibility loop drives z_k to a near-feasible z_0 and
   returns the last separating halfspace as the region. Problems carrying an
   exact projector may bypass the loop entirely and use the feasible set
   itself as the region.

2. Cycle stage. The operators are visited once each, in order: a step of
   size alpha_k along a selection of T_i at the running point, followed by a
   projection onto the region. The region contains C, so the cycle never
   crosses to the far side of any solution.

3. Averaging stage. sigma_k accumulates the stepsizes and the reported
   iterate is the running stepsize-weighted average of the cycle outputs,
   x_{k+1} = (1 - alpha_k/sigma_k) x_k + (alpha_k/sigma_k) z_{k+1}. The raw
   z iterates need not converge for merely monotone operators (rotations
   survive); the averaged sequence is the one with guarantees.

The recorded eta_k is the norm bound max(1, max_i ||u_i||) realized by the
cycle's own selections. Under the adaptive rule the stepsize divides the raw
numerator beta_k by a probe of that bound taken at z_0 before the cycle
runs, and the feasibility stage is driven by beta_k itself, since the
stepsize does not exist until the probe point does.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, ExactSet, Halfspace
from .errors import ConfigError, NonFiniteIterate
from .innerloop import feasible_shortcut, run_inner
from .operators import Operator
from .space import Vector, as_point

TRACE_COLUMNS = (
    "k",
    "alpha_k",
    "eta_k",
    "sigma_k",
    "inner_iterations",
    "dist_x",
    "dist_z0",
    "err_x",
    "fejer_slack",
    "wall_time",
)


class StepsizeSchedule:
    """Base stepsize rule. Subclasses fix alpha_k, or beta_k plus a divisor."""

    adaptive = False

    def alpha(self, k: int, eta: float = 1.0) -> float:
        raise NotImplementedError

    def inner_tolerance(self, k: int) -> float:
        """Scale handed to the feasibility loop at outer index k."""
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


class PowerStepsize(StepsizeSchedule):
    """Explicit rule alpha_k = a / (k+1)**p with p in (1/2, 1].

    The exponent window makes the sum of alpha_k diverge while the sum of
    alpha_k**2 converges, which is what the averaging analysis consumes.
    """

    def __init__(self, a: float = 1.0, p: float = 1.0):
        a = float(a)
        p = float(p)
        if not (a > 0 and np.isfinite(a)):
            raise ConfigError("stepsize scale a must be positive and finite")
        if not (0.5 < p <= 1.0):
            raise ConfigError("stepsize exponent p must lie in (1/2, 1]")
        self.a = a
        self.p = p

    def alpha(self, k: int, eta: float = 1.0) -> float:
        return self.a / (k + 1) ** self.p

    def inner_tolerance(self, k: int) -> float:
        return self.alpha(k)

    def spec(self) -> dict:
        return {"kind": "power", "a": self.a, "p": self.p}


class ConstantStepsize(StepsizeSchedule):
    """Fixed alpha_k. Violates the square-summability the averaging analysis
    needs, so it is shipped for diagnostics only: per-step descent bounds
    still hold and the audit's summability report flags the divergence.
    """

    def __init__(self, a: float):
        a = float(a)
        if not (a > 0 and np.isfinite(a)):
            raise ConfigError("stepsize must be positive and finite")
        self.a = a

    def alpha(self, k: int, eta: float = 1.0) -> float:
        return self.a

    def inner_tolerance(self, k: int) -> float:
        return self.a

    def spec(self) -> dict:
        return {"kind": "constant", "a": self.a}


class AdaptivePowerStepsize(StepsizeSchedule):
    """Adaptive rule alpha_k = beta_k / max(1, eta_k), beta_k = a / (k+1)**p.

    Dividing by the realized operator-norm proxy keeps eta_k * alpha_k equal
    to the square-summable numerator regardless of how large the selections
    get, at the price of a smaller effective step.
    """

    adaptive = True

    def __init__(self, a: float = 1.0, p: float = 1.0):
        self._base = PowerStepsize(a, p)
        self.a = self._base.a
        self.p = self._base.p

    def beta(self, k: int) -> float:
        return self._base.alpha(k)

    def alpha(self, k: int, eta: float = 1.0) -> float:
        eta = float(eta)
        if not (eta >= 1.0 and np.isfinite(eta)):
            raise ConfigError("eta must be finite and at least 1")
        return self.beta(k) / eta

    def inner_tolerance(self, k: int) -> float:
        return self.beta(k)

    def spec(self) -> dict:
        return {"kind": "adaptive_power", "a": self.a, "p": self.p}


def stepsize(schedule: StepsizeSchedule, k: int, eta_k: float = 1.0) -> float:
    """Stepsize at outer index k; validates inputs and the output sign."""
    k = int(k)
    if k < 0:
        raise ConfigError("outer index must be nonnegative")
    eta_k = float(eta_k)
    if not (eta_k >= 1.0 and np.isfinite(eta_k)):
        raise ConfigError("eta_k must be finite and at least 1")
    a = schedule.alpha(k, eta_k)
    if not (a > 0 and np.isfinite(a)):
        raise ConfigError(f"schedule produced a nonpositive stepsize {a!r}")
    return a


@dataclass(frozen=True, eq=False)
class Problem:
    """A variational inequality VI(T1+...+Tm, C) handed to the solver.

    operators are the summands' selection oracles, visited in order by the
    cycle. constraint is the sublevel description of C. known_solution and
    certificate (one selection u_i of T_i at the solution, per operator) are
    optional and enable error traces and per-step descent audits.
    use_exact_projection replaces the feasibility stage with the
    constraint's exact projector, for feasible sets that are cheap to
    project onto directly.
    """

    operators: tuple[Operator, ...]
    constraint: Constraint
    label: str = ""
    known_solution: np.ndarray | None = None
    certificate: tuple[np.ndarray, ...] | None = None
    use_exact_projection: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ops = tuple(self.operators)
        if len(ops) < 1:
            raise ConfigError("a problem needs at least one operator")
        dim = self.constraint.dim
        for op in ops:
            if op.dim != dim:
                raise ConfigError(
                    f"operator {op.label!r} has dim {op.dim}, constraint has {dim}"
                )
        object.__setattr__(self, "operators", ops)
        if self.known_solution is not None:
            xs = as_point(self.known_solution, dim)
            cx = self.constraint.value(xs)
            if cx > 1e-9:
                raise ConfigError(f"known solution is infeasible: c(x*) = {cx!r}")
            object.__setattr__(self, "known_solution", xs)
        if self.certificate is not None:
            if self.known_solution is None:
                raise ConfigError("a certificate requires a known solution")
            cert = tuple(as_point(u, dim) for u in self.certificate)
            if len(cert) != len(ops):
                raise ConfigError("certificate needs one selection per operator")
            object.__setattr__(self, "certificate", cert)
        if self.use_exact_projection and self.constraint.exact_set is None:
            raise ConfigError("exact projection requested but constraint has no exact set")

    @property
    def m(self) -> int:
        return len(self.operators)

    @property
    def dim(self) -> int:
        return self.constraint.dim

    def certificate_sum(self) -> np.ndarray:
        return np.sum(np.stack(self.certificate), axis=0)


@dataclass
class TraceRecord:
    """One outer iteration, in the stable column order of trace files."""

    k: int
    alpha_k: float
    eta_k: float
    sigma_k: float
    inner_iterations: int
    dist_x: float
    dist_z0: float
    err_x: float
    fejer_slack: float
    wall_time: float

    def row(self) -> list:
        return [getattr(self, c) for c in TRACE_COLUMNS]


@dataclass
class StepSnapshot:
    """Raw per-step data for replay audits; stored only on request."""

    k: int
    z: Vector
    z0: Vector
    z_next: Vector
    region: Halfspace | ExactSet
    inner_iterations: int


@dataclass
class CycleCheck:
    """Worst-case cycle diagnostics of one outer step.

    containment is the largest distance of a cycle point from the region it
    was projected onto; drift_excess the largest violation of the bound
    ||z_j - z_i|| <= (j - i) * eta_k * alpha_k over cycle index pairs.
    eta_stress marks an adaptive step whose realized norm bound exceeded the
    z0 probe by more than a factor of 10, which degrades the stepsize clamp.
    """

    k: int
    containment: float
    drift_excess: float
    eta_stress: bool = False


@dataclass
class SolverState:
    """Mutable run state: base point, average, accumulators, and records."""

    z: Vector
    x: Vector
    k: int = 0
    sigma: float = 0.0
    last_eta: float = 1.0
    trace: list = field(default_factory=list)
    snapshots: list | None = None
    cycle_checks: list = field(default_factory=list)
    stop_reason: str | None = None


def outer_step(
    problem: Problem,
    schedule: StepsizeSchedule,
    state: SolverState,
    theta: float = 1.0,
    max_inner: int = 10_000,
    keep_snapshot: bool = False,
    record: bool = True,
) -> TraceRecord:
    """Advance the state by one outer iteration and return its record."""
    t0 = time.perf_counter()
    k = state.k
    z = state.z
    constraint = problem.constraint

    # Feasibility stage. The loop tolerance is theta times the schedule's
    # raw scale at k (the stepsize itself for explicit rules).
    cz = constraint.value(z)
    if problem.use_exact_projection:
        region = constraint.exact_set
        z0 = z if cz <= 0 else region.project(z)
        inner_iters, dist_z0 = 0, 0.0
    elif cz <= 0:
        res = feasible_shortcut(constraint, z)
        z0, region, inner_iters, dist_z0 = res.z0, res.sep, 0, 0.0
    else:
        res = run_inner(
            constraint, z, theta, schedule.inner_tolerance(k), max_inner
        )
        z0, region, inner_iters, dist_z0 = (
            res.z0,
            res.sep,
            res.iterations,
            res.dist_bound_at_exit,
        )

    # Stepsize. The adaptive rule probes all selections at z0 first.
    probe = None
    if schedule.adaptive:
        probe = 1.0
        for op in problem.operators:
            probe = max(probe, float(np.linalg.norm(op.select(z0))))
        alpha = stepsize(schedule, k, probe)
    else:
        alpha = stepsize(schedule, k)

    # Cycle stage: one step and one region projection per operator.
    points = [z0]
    cur = z0
    eta = 1.0
    for op in problem.operators:
        u = op.select(cur)
        eta = max(eta, float(np.linalg.norm(u)))
        cur = region.project(cur - alpha * u)
        points.append(cur)
    z_next = cur
    if not np.all(np.isfinite(z_next)):
        raise NonFiniteIterate(f"outer iterate diverged at k={k}")

    # Averaging stage.
    sigma = state.sigma + alpha
    weight = alpha / sigma
    x_next = (1.0 - weight) * state.x + weight * z_next

    # Cycle diagnostics: containment in the region and the drift bound.
    containment = max(float(region.distance(p)) for p in points)
    drift = 0.0
    step_bound = eta * alpha
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            gap = float(np.linalg.norm(points[j] - points[i]))
            drift = max(drift, gap - (j - i) * step_bound)
    stress = probe is not None and eta > 10.0 * probe
    state.cycle_checks.append(CycleCheck(k, containment, drift, stress))

    # Optional audit quantities against a known solution.
    err_x = float("nan")
    fejer_slack = float("nan")
    if problem.known_solution is not None:
        xs = problem.known_solution
        err_x = float(np.linalg.norm(x_next - xs))
        if problem.certificate is not None:
            m = problem.m
            eta_bar = max(float(np.linalg.norm(u)) for u in problem.certificate)
            u_bar = float(np.linalg.norm(problem.certificate_sum()))
            bound = m * (
                (eta * alpha) ** 2 + (m - 1) * eta_bar * eta * alpha**2
            ) + 2.0 * theta * u_bar * schedule.inner_tolerance(k) * alpha
            before = float(np.linalg.norm(z - xs)) ** 2
            after = float(np.linalg.norm(z_next - xs)) ** 2
            fejer_slack = before + bound - after

    dist_x = constraint.dist_upper(x_next)

    if keep_snapshot:
        if state.snapshots is None:
            state.snapshots = []
        state.snapshots.append(
            StepSnapshot(k, z.copy(), z0.copy(), z_next.copy(), region, inner_iters)
        )

    state.k = k + 1
    state.z = z_next
    state.x = x_next
    state.sigma = sigma
    state.last_eta = eta

    rec = TraceRecord(
        k=k,
        alpha_k=alpha,
        eta_k=eta,
        sigma_k=sigma,
        inner_iterations=inner_iters,
        dist_x=dist_x,
        dist_z0=dist_z0,
        err_x=err_x,
        fejer_slack=fejer_slack,
        wall_time=time.perf_counter() - t0,
    )
    if record:
        state.trace.append(rec)
    return rec


def run(
    problem: Problem,
    schedule: StepsizeSchedule,
    theta: float = 1.0,
    x0=None,
    max_outer: int = 1000,
    target_err: float | None = None,
    target_dist: float | None = None,
    cadence: int = 1,
    snapshots: bool = False,
    max_inner: int = 10_000,
) -> SolverState:
    """Run the outer iteration until a target or the iteration cap.

    Parameters
    ----------
    problem : Problem
    schedule : StepsizeSchedule
    theta : float
        Relaxation factor of the feasibility stage, positive.
    x0 : array_like, optional
        Starting point, defaults to the origin.
    max_outer : int
        Outer iteration cap.
    target_err : float, optional
        Stop once ||x_k - x*|| falls below this; needs a known solution.
    target_dist : float, optional
        Stop once the distance bound at x_k falls below this.
    cadence : int
        Keep every cadence-th trace record (the final record is always kept).
    snapshots : bool
        Keep raw per-step snapshots for replay audits.
    max_inner : int
        Projection budget per feasibility stage.

    Returns
    -------
    SolverState
        Final state with trace, diagnostics, and stop_reason set.
    """
    theta = float(theta)
    if theta <= 0:
        raise ConfigError("theta must be positive")
    cadence = int(cadence)
    if cadence < 1:
        raise ConfigError("cadence must be at least 1")
    if max_outer < 1:
        raise ConfigError("max_outer must be at least 1")
    if target_err is not None and problem.known_solution is None:
        raise ConfigError("target_err needs a problem with a known solution")

    if x0 is None:
        x0 = np.zeros(problem.dim)
    x0 = as_point(x0, problem.dim)
    state = SolverState(z=x0.copy(), x=x0.copy())
    if snapshots:
        state.snapshots = []

    for _ in range(max_outer):
        rec = outer_step(
            problem,
            schedule,
            state,
            theta=theta,
            max_inner=max_inner,
            keep_snapshot=snapshots,
            record=(state.k % cadence == 0) or (state.k == max_outer - 1),
        )
        if target_err is not None and rec.err_x <= target_err:
            state.stop_reason = "target_err"
            break
        if target_dist is not None and rec.dist_x <= target_dist:
            state.stop_reason = "target_dist"
            break
    if state.stop_reason is None:
        state.stop_reason = "max_outer"
    if not state.trace or state.trace[-1].k != state.k - 1:
        # Cadence decimation must not drop the final record.
        state.trace.append(rec)
    return state
