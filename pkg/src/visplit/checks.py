"""Self-check suites: seeded random sweeps of the core guarantees.

Each suite returns a list of CheckResult rows; the CLI prints one line per
row and fails the process when any row fails. The sweeps compare the fast
projection paths against the enumeration oracle, sample the defining
inequalities of the operator and constraint layers, and audit short solver
runs step by step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .constraints import (
    BallSet,
    BoxSet,
    Constraint,
    GraphSet,
    Halfspace,
    project_halfspace_pair,
)
from .errors import ConfigError
from .innerloop import feasible_shortcut, run_inner
from .operators import (
    AffineOperator,
    GradientOperator,
    LinearMap,
    MaxOfAffine,
    NormFunction,
    Quadratic,
)
from .problems import FAMILIES, build
from .solver import AdaptivePowerStepsize, PowerStepsize, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _row(name: str, worst: float, tol: float, extra: str = "") -> CheckResult:
    detail = f"worst {worst:.3e} (tol {tol:.1e})"
    if extra:
        detail += f", {extra}"
    return CheckResult(name, worst <= tol, detail)


def _ball_gauge(center, radius) -> Constraint:
    n = center.size
    fn = Quadratic(
        2.0 * np.eye(n),
        -2.0 * center,
        float(center @ center) - radius**2,
        label="gauge",
    )
    return Constraint(fn, exact_set=BallSet(center, radius))


def check_projections(seed: int = 0, trials: int = 1000) -> list[CheckResult]:
    """Projection paths against the active-set enumeration oracle."""
    rng = np.random.default_rng(seed)
    out = []

    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        h = Halfspace(rng.standard_normal(n), float(rng.standard_normal()))
        w = 3.0 * rng.standard_normal(n)
        worst = max(worst, float(np.linalg.norm(h.project(w) - oracle.qp_project(w, [h]))))
    out.append(_row("halfspace projection vs oracle", worst, 1e-9))

    # Pair geometry shaped like the feasibility loop's: separator of a ball
    # at an exterior point, localizer through that point. The noise makes
    # some intersections razor-thin wedges, which is the hard regime.
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        center = rng.standard_normal(n)
        radius = float(rng.uniform(0.3, 2.0))
        con = _ball_gauge(center, radius)
        d = rng.standard_normal(n)
        d /= float(np.linalg.norm(d))
        z = center + radius * float(rng.uniform(1.05, 3.0)) * d
        w = z + 0.7 * rng.standard_normal(n)
        sep = con.separator_at(z)
        loc = Halfspace(w - z, float((w - z) @ z)) if np.any(w != z) else None
        halfspaces = [sep] if loc is None else [sep, loc]
        got = project_halfspace_pair(sep, z, w)
        want = oracle.qp_project(w, halfspaces)
        worst = max(worst, float(np.linalg.norm(got - want)))
    out.append(_row("pair projection vs oracle", worst, 1e-8))

    # Exact sets: membership plus the variational characterization
    # <w - P(w), s - P(w)> <= 0 over sampled members s.
    worst = 0.0
    for _ in range(trials // 3):
        n = int(rng.integers(2, 5))
        sets = [
            BallSet(rng.standard_normal(n), float(rng.uniform(0.2, 2.0))),
            BoxSet(-rng.uniform(0.2, 2.0, n), rng.uniform(0.2, 2.0, n)),
            GraphSet(rng.standard_normal((n, n))),
        ]
        for region in sets:
            w = 3.0 * rng.standard_normal(region.dim)
            p = region.project(w)
            worst = max(worst, float(region.distance(p)))
            for _ in range(10):
                # Members sampled by projecting ambient noise into the set.
                s = region.project(3.0 * rng.standard_normal(region.dim))
                worst = max(worst, float((w - p) @ (s - p)))
    out.append(_row("exact projector optimality", worst, 1e-8))

    # Firm nonexpansiveness of halfspace projection.
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        h = Halfspace(rng.standard_normal(n), float(rng.standard_normal()))
        u, v = 2.0 * rng.standard_normal(n), 2.0 * rng.standard_normal(n)
        pu, pv = h.project(u), h.project(v)
        lhs = float(np.linalg.norm(pu - pv)) ** 2
        rhs = float((pu - pv) @ (u - v))
        worst = max(worst, lhs - rhs)
    out.append(_row("firm nonexpansiveness", worst, 1e-9))
    return out


def check_operators(seed: int = 0, trials: int = 1000) -> list[CheckResult]:
    """Monotonicity, subgradient inequality, and adjoint identities."""
    rng = np.random.default_rng(seed)
    out = []

    def random_functions(n):
        A = rng.standard_normal((n, n))
        return [
            Quadratic(A @ A.T, rng.standard_normal(n)),
            NormFunction(rng.standard_normal(n), float(rng.uniform(0.5, 2.0))),
            MaxOfAffine(rng.standard_normal((4, n)), rng.standard_normal(4)),
        ]

    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n))
        ops = [AffineOperator(A @ A.T + rng.standard_normal() * _skew(rng, n))]
        ops += [GradientOperator(f) for f in random_functions(n)]
        x, y = 2.0 * rng.standard_normal(n), 2.0 * rng.standard_normal(n)
        for op in ops:
            gap = float((op.select(x) - op.select(y)) @ (x - y))
            worst = max(worst, -gap)
    out.append(_row("monotonicity on sampled pairs", worst, 1e-9))

    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        for f in random_functions(n):
            x, y = 2.0 * rng.standard_normal(n), 2.0 * rng.standard_normal(n)
            worst = max(worst, -oracle.subgradient_gap(f, x, y))
    out.append(_row("subgradient inequality", worst, 1e-9))

    worst = 0.0
    for _ in range(trials // 4):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n))
        f = Quadratic(A @ A.T, rng.standard_normal(n))
        worst = max(worst, oracle.fd_gradient_gap(f, rng.standard_normal(n)))
    out.append(_row("gradients vs finite differences", worst, 1e-5))

    worst = 0.0
    for _ in range(trials):
        p, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        L = LinearMap(rng.standard_normal((p, n)))
        x, y = rng.standard_normal(n), rng.standard_normal(p)
        worst = max(
            worst,
            abs(float(L.apply(x) @ y) - float(x @ L.adjoint_apply(y))),
        )
    out.append(_row("adjoint identity", worst, 1e-10))
    return out


def _skew(rng, n):
    S = rng.standard_normal((n, n))
    return S - S.T


def check_constraints(seed: int = 0, trials: int = 200) -> list[CheckResult]:
    """Distance rules and separator containment."""
    rng = np.random.default_rng(seed)
    out = []

    # dist_upper must bound the true distance for every rule on the same set.
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        center = rng.standard_normal(n)
        radius = float(rng.uniform(0.3, 2.0))
        exact = _ball_gauge(center, radius)
        slater = Constraint(exact.fn, slater_point=center)
        y = center + 4.0 * rng.standard_normal(n)
        true_d = float(exact.exact_set.distance(y))
        worst = max(worst, true_d - exact.dist_upper(y), true_d - slater.dist_upper(y))
    out.append(_row("distance rules bound the true distance", worst, 1e-9))

    # Separating halfspaces must contain the feasible set.
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        center = rng.standard_normal(n)
        radius = float(rng.uniform(0.3, 2.0))
        con = _ball_gauge(center, radius)
        d = rng.standard_normal(n)
        d /= float(np.linalg.norm(d))
        y = center + radius * float(rng.uniform(1.01, 4.0)) * d
        sep = con.separator_at(y)
        for _ in range(20):
            s = con.exact_set.project(center + 3.0 * rng.standard_normal(n))
            worst = max(worst, float(sep.distance(s)))
        worst = max(worst, -(sep.residual(y)))
    out.append(_row("separators contain the feasible set", worst, 1e-9))
    return out


def check_innerloop(seed: int = 0, trials: int = 150) -> list[CheckResult]:
    """Exit contract and base-point monotonicity of the feasibility loop."""
    rng = np.random.default_rng(seed)
    out = []
    worst_exit = 0.0
    worst_fejer = 0.0
    worst_shortcut = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        center = rng.standard_normal(n)
        radius = float(rng.uniform(0.3, 2.0))
        con = _ball_gauge(center, radius)
        d = rng.standard_normal(n)
        d /= float(np.linalg.norm(d))
        z = center + radius * float(rng.uniform(1.05, 3.0)) * d
        tol = float(rng.uniform(0.01, 0.3))
        res = run_inner(con, z, 1.0, tol)
        worst_exit = max(worst_exit, res.dist_bound_at_exit - tol)
        worst_exit = max(worst_exit, con.exact_set.distance(res.z0) - tol)
        if res.iterations < 1:
            worst_exit = max(worst_exit, 1.0)
        for _ in range(20):
            s = con.exact_set.project(center + 3.0 * rng.standard_normal(n))
            gap = float(np.linalg.norm(res.z0 - s)) - float(np.linalg.norm(z - s))
            worst_fejer = max(worst_fejer, gap)
            worst_fejer = max(worst_fejer, float(res.sep.distance(s)))
        # Pull strictly inside; boundary projections can sit a few ulps out.
        inside = center + 0.99 * (con.exact_set.project(z) - center)
        short = feasible_shortcut(con, inside)
        worst_shortcut = max(
            worst_shortcut,
            float(np.linalg.norm(short.z0 - inside)),
            float(abs(short.dist_bound_at_exit)),
        )
    out.append(_row("exit contract", worst_exit, 1e-12))
    out.append(_row("no feasible point moves away", worst_fejer, 1e-9))
    out.append(_row("feasible shortcut is a no-op move", worst_shortcut, 1e-12))
    return out


def check_fejer(seed: int = 0, trials: int = 200) -> list[CheckResult]:
    """Replay audit of a short run on every shipped family."""
    out = []
    for family in FAMILIES:
        problem = oracle.with_reference(build(family, {}))
        for schedule in (PowerStepsize(0.5, 1.0), AdaptivePowerStepsize(0.5, 0.75)):
            x0 = np.full(problem.dim, 0.3)
            state = run(
                problem,
                schedule,
                x0=x0,
                max_outer=max(20, min(trials, 200)),
                snapshots=True,
            )
            report = oracle.fejer_audit(problem, schedule, state)
            name = f"audit {family} [{schedule.spec()['kind']}]"
            detail = (
                f"replay {report.max_replay_gap:.1e}, "
                f"containment {report.worst_containment:.1e}, "
                f"drift {report.worst_drift_excess:.1e}, "
                f"violations {report.fejer_violations}"
            )
            out.append(CheckResult(name, report.ok, detail))
    return out


SUITES = {
    "projections": check_projections,
    "operators": check_operators,
    "constraints": check_constraints,
    "innerloop": check_innerloop,
    "fejer": check_fejer,
}


def run_suite(name: str, seed: int = 0, trials: int | None = None) -> list[CheckResult]:
    if name == "all":
        out = []
        for key in SUITES:
            out.extend(run_suite(key, seed=seed, trials=trials))
        return out
    if name not in SUITES:
        raise ConfigError(f"unknown check suite {name!r}")
    fn = SUITES[name]
    if trials is None:
        return fn(seed=seed)
    return fn(seed=seed, trials=trials)
