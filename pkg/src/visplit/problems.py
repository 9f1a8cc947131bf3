"""Shipped problem families with oracle-checkable solutions.

Every builder returns a :class:`~visplit.solver.Problem` whose ``meta``
records the family name and raw parameters, so reference oracles can
recompute solutions along an independent route. Builders attach a known
solution and a matching certificate only where the derivation is a genuine
closed form (ball projection, small linear solves); everything else is left
to the reference oracle.

Families
--------
quadratic_over_ball
    VI for the gradient of 0.5||x - target||^2, split into m equal parts,
    over a Euclidean ball.
affine_vi_over_polyhedron
    Affine monotone operator over a box (exact projector) or a general
    row polyhedron (strictly feasible point supplies the distance rule).
a1 (argmin refinement)
    VI over C = argmin f, encoded as the sublevel set {f - f_min <= 0}.
a2 (composite minimization)
    min phi1(L x) + phi2(x), lifted to the graph {(x, y) : L x = y} with
    one operator differentiating each term; the graph has an exact
    projector, so the feasibility loop is bypassed.
a3 (saddle stationarity)
    Stationary points of phi1(x1) + <L x1, x2> - phi2*(...), reduced to two
    monotone blocks: a subgradient block and a skew coupling block. The
    constraint is the whole space.
"""

from __future__ import annotations

import numpy as np

from .constraints import (
    BallSet,
    BoxSet,
    Constraint,
    GraphSet,
    WholeSpace,
)
from .errors import ConfigError, DimensionMismatch
from .operators import (
    AffineOperator,
    ConstantFunction,
    ConvexFunction,
    EmbeddedOperator,
    GradientOperator,
    LinearMap,
    MaxOfAffine,
    NormFunction,
    Operator,
    Quadratic,
    ScaledOperator,
    ShiftedFunction,
)
from .solver import Problem
from .space import Vector, as_point


class _GraphResidual(ConvexFunction):
    """c(x, y) = 0.5 ||L x - y||^2 on the stacked space; zero exactly on the graph."""

    differentiable = True

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        super().__init__(M.shape[0] + M.shape[1], "graph_residual")
        self.matrix = M
        self.n = M.shape[1]

    def value(self, v: Vector) -> float:
        v = as_point(v, self.dim)
        r = self.matrix @ v[: self.n] - v[self.n :]
        return 0.5 * float(r @ r)

    def subgradient(self, v: Vector) -> Vector:
        v = as_point(v, self.dim)
        r = self.matrix @ v[: self.n] - v[self.n :]
        return np.concatenate([self.matrix.T @ r, -r])


class _SaddleCoupling(Operator):
    """(x1, x2) -> (L x2, grad phi2(x2) - L x1) with L self-adjoint.

    The coupling part is skew, so the block is monotone whenever phi2 is
    convex; phi2 must be differentiable for the second component to be a
    genuine gradient.
    """

    def __init__(self, matrix, phi2: ConvexFunction):
        M = np.asarray(matrix, dtype=float)
        n = M.shape[0]
        if M.shape != (n, n):
            raise DimensionMismatch("saddle coupling needs a square matrix")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise ConfigError("saddle coupling needs a self-adjoint matrix")
        if phi2.dim != n:
            raise DimensionMismatch("phi2 must act on the second block")
        if not phi2.differentiable:
            raise ConfigError("the smooth saddle term must be differentiable")
        super().__init__(2 * n, "saddle_coupling")
        self.matrix = M
        self.phi2 = phi2
        self.n = n

    def select(self, v: Vector) -> Vector:
        v = as_point(v, self.dim)
        x1, x2 = v[: self.n], v[self.n :]
        return np.concatenate(
            [self.matrix @ x2, self.phi2.subgradient(x2) - self.matrix @ x1]
        )


def _try_solve(A, b):
    """Solve A x = b, returning None when the system is singular or inconsistent."""
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(x)) or np.max(np.abs(A @ x - b)) > 1e-9 * max(
        1.0, float(np.max(np.abs(b)))
    ):
        return None
    return x


def _split_affine(matrix, offset, m: int) -> tuple[Operator, ...]:
    """m equal monotone parts of x -> matrix x + offset."""
    base = AffineOperator(matrix, offset)
    if m == 1:
        return (base,)
    return tuple(ScaledOperator(base, 1.0 / m, label=f"affine/{m}") for _ in range(m))


def build_quadratic_over_ball(
    target,
    m: int = 1,
    center=None,
    radius: float = 1.0,
    squared: bool = True,
) -> Problem:
    """VI for T = grad 0.5||x - target||^2 over a ball, split into m parts.

    The solution is the ball projection of the target. The sublevel function
    is ||x - center||^2 - radius^2 by default (smooth), or the norm form
    ||x - center|| - radius with squared=False.
    """
    target = as_point(target)
    n = target.size
    m = int(m)
    if m < 1:
        raise ConfigError("m must be at least 1")
    center = np.zeros(n) if center is None else as_point(center, n)
    radius = float(radius)
    if radius <= 0:
        raise ConfigError("radius must be positive")

    ball = BallSet(center, radius)
    if squared:
        fn = Quadratic(
            2.0 * np.eye(n),
            -2.0 * center,
            float(center @ center) - radius**2,
            label="ball_gauge_sq",
        )
    else:
        fn = NormFunction(center, 1.0, -radius, label="ball_gauge")
    constraint = Constraint(fn, exact_set=ball, label="ball")

    ops = _split_affine(np.eye(n), -target, m)
    x_star = ball.project(target)
    cert = tuple((x_star - target) / m for _ in range(m))
    return Problem(
        operators=ops,
        constraint=constraint,
        label=f"quadratic_over_ball(m={m})",
        known_solution=x_star,
        certificate=cert,
        meta={
            "family": "quadratic_over_ball",
            "target": target.tolist(),
            "m": m,
            "center": center.tolist(),
            "radius": radius,
            "squared": bool(squared),
        },
    )


def build_affine_vi_over_polyhedron(
    matrix,
    offset,
    box: tuple | None = None,
    rows=None,
    rhs=None,
    interior_point=None,
    m: int = 1,
) -> Problem:
    """Affine VI over a box or a general row polyhedron {Ax <= b}.

    The box form carries an exact projector. The row form describes the set
    through the max of the row residuals and needs a strictly feasible
    ``interior_point`` for the distance rule. No solution is attached here;
    the reference oracle recovers one by face enumeration.
    """
    m = int(m)
    if m < 1:
        raise ConfigError("m must be at least 1")
    A = np.asarray(matrix, dtype=float)
    n = A.shape[0]
    offset = as_point(offset, n)

    if (box is None) == (rows is None):
        raise ConfigError("give exactly one of box or rows")
    if box is not None:
        lo, hi = box
        lo = as_point(lo, n)
        hi = as_point(hi, n)
        gauge = MaxOfAffine(
            np.vstack([np.eye(n), -np.eye(n)]),
            np.concatenate([hi, -lo]),
            label="box_gauge",
        )
        constraint = Constraint(gauge, exact_set=BoxSet(lo, hi), label="box")
        meta_set = {"box": [lo.tolist(), hi.tolist()]}
    else:
        rows = np.asarray(rows, dtype=float)
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        if interior_point is None:
            raise ConfigError("a row polyhedron needs a strictly feasible point")
        gauge = MaxOfAffine(rows, rhs, label="polyhedron_gauge")
        constraint = Constraint(gauge, slater_point=interior_point, label="polyhedron")
        meta_set = {
            "rows": rows.tolist(),
            "rhs": rhs.tolist(),
            "interior_point": as_point(interior_point, n).tolist(),
        }

    ops = _split_affine(A, offset, m)
    return Problem(
        operators=ops,
        constraint=constraint,
        label=f"affine_vi({constraint.label}, m={m})",
        meta={
            "family": "affine_vi_over_polyhedron",
            "matrix": A.tolist(),
            "offset": offset.tolist(),
            "m": m,
            **meta_set,
        },
    )


def build_a1(
    operator: Operator,
    objective: ConvexFunction,
    f_min: float,
    exact_set=None,
    surrogate=None,
    slater_point=None,
    known_solution=None,
) -> Problem:
    """VI over the minimizer set of ``objective``, via C = {f - f_min <= 0}.

    The minimizer set has empty interior whenever f_min is the true minimum,
    so a strict interior point never exists; the caller supplies whichever
    distance rule the instance admits (an exact projector for recognizable
    minimizer sets, a surrogate bound otherwise).
    """
    fn = ShiftedFunction(objective, float(f_min), label=f"{objective.label}-min")
    constraint = Constraint(
        fn,
        exact_set=exact_set,
        surrogate=surrogate,
        slater_point=slater_point,
        label="argmin_set",
    )
    cert = None
    if known_solution is not None:
        known_solution = as_point(known_solution, operator.dim)
        cert = (operator.select(known_solution),)
    return Problem(
        operators=(operator,),
        constraint=constraint,
        label="argmin_refinement",
        known_solution=known_solution,
        certificate=cert,
        meta={"family": "a1", "f_min": float(f_min)},
    )


def build_a2(matrix, phi1: ConvexFunction, phi2: ConvexFunction) -> Problem:
    """Composite minimization min phi1(L x) + phi2(x) on the graph of L.

    Lifted to pairs (x, y) constrained to y = L x, with one operator
    differentiating each term in its own block: the phi1 block acts on the
    y coordinates, the phi2 block on the x coordinates, so the summed
    operator is the gradient of phi1(y) + phi2(x) and the VI on the graph
    reproduces the composite first-order condition
    L' grad phi1(L x) + grad phi2(x) = 0.

    The graph is a subspace with a cheap exact projector, so the problem is
    built with use_exact_projection and the feasibility loop never runs.
    """
    L = np.asarray(matrix, dtype=float)
    if L.ndim != 2:
        raise DimensionMismatch("the coupling map must be a matrix")
    p, n = L.shape
    if phi1.dim != p:
        raise DimensionMismatch("phi1 must act on the output space of the map")
    if phi2.dim != n:
        raise DimensionMismatch("phi2 must act on the input space of the map")
    dim = n + p

    t_outer = EmbeddedOperator(dim, GradientOperator(phi1), n, label="outer_term")
    t_inner = EmbeddedOperator(dim, GradientOperator(phi2), 0, label="inner_term")
    constraint = Constraint(
        _GraphResidual(L), exact_set=GraphSet(L), label="graph"
    )

    known = None
    cert = None
    if isinstance(phi1, Quadratic) and isinstance(phi2, Quadratic):
        # First-order condition of the composite objective.
        H = L.T @ phi1.Q @ L + phi2.Q
        g = L.T @ phi1.b + phi2.b
        x_star = _try_solve(H, -g)
        if x_star is not None:
            known = np.concatenate([x_star, L @ x_star])
            u1 = np.concatenate([np.zeros(n), phi1.subgradient(L @ x_star)])
            u2 = np.concatenate([phi2.subgradient(x_star), np.zeros(p)])
            cert = (u1, u2)

    return Problem(
        operators=(t_outer, t_inner),
        constraint=constraint,
        label="composite_min",
        known_solution=known,
        certificate=cert,
        use_exact_projection=True,
        meta={"family": "a2", "matrix": L.tolist()},
    )


def build_a3(matrix, phi1: ConvexFunction, phi2: ConvexFunction) -> Problem:
    """Saddle stationarity VI on pairs (x1, x2), unconstrained.

    The first operator carries the subgradient of phi1 in the first block;
    the second couples the blocks through a self-adjoint map and the
    gradient of a smooth convex phi2:

        T1(x1, x2) = (subgrad phi1(x1), 0)
        T2(x1, x2) = (L x2, grad phi2(x2) - L x1)

    T2 is monotone because the coupling terms cancel in the pairing.
    """
    L = np.asarray(matrix, dtype=float)
    n = L.shape[0]
    if phi1.dim != n:
        raise DimensionMismatch("phi1 must act on the first block")
    dim = 2 * n

    t1 = EmbeddedOperator(dim, GradientOperator(phi1), 0, label="separable_term")
    t2 = _SaddleCoupling(L, phi2)
    constraint = Constraint(
        ConstantFunction(dim, -1.0, label="everywhere"),
        exact_set=WholeSpace(dim),
        label="whole_space",
    )

    known = None
    cert = None
    if isinstance(phi1, Quadratic) and isinstance(phi2, Quadratic):
        # Stationarity: grad phi1(x1) + L x2 = 0, grad phi2(x2) - L x1 = 0.
        K = np.block([[phi1.Q, L], [-L, phi2.Q]])
        rhs = -np.concatenate([phi1.b, phi2.b])
        sol = _try_solve(K, rhs)
        if sol is not None:
            known = sol
            u1 = np.concatenate([phi1.subgradient(sol[:n]), np.zeros(n)])
            u2 = t2.select(sol)
            cert = (u1, u2)

    return Problem(
        operators=(t1, t2),
        constraint=constraint,
        label="saddle_stationarity",
        known_solution=known,
        certificate=cert,
        meta={"family": "a3", "matrix": L.tolist()},
    )


def _quadratic_from_params(params: dict, dim: int, what: str) -> Quadratic:
    weight = float(params.get("weight", 1.0))
    center = params.get("center", [0.0] * dim)
    q = Quadratic.half_sq_distance(as_point(center, dim), weight, label=what)
    return q


def _as_matrix(value, what: str) -> np.ndarray:
    M = np.asarray(value, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ConfigError(f"{what} must be a matrix")
    return M


FAMILY_PARAMS = {
    "quadratic_over_ball": frozenset({"target", "m", "center", "radius", "squared"}),
    "affine_vi_over_polyhedron": frozenset(
        {"matrix", "offset", "m", "box", "rows", "rhs", "interior_point"}
    ),
    "a1": frozenset({"target", "objective"}),
    "a2": frozenset({"matrix", "phi1", "phi2"}),
    "a3": frozenset({"matrix", "phi1", "phi2"}),
}

_PHI_PARAMS = frozenset({"weight", "center"})


def validate_params(family: str, params: dict, where: str = "params") -> None:
    """Reject unknown configuration fields, naming the offending path."""
    if family not in FAMILY_PARAMS:
        raise ConfigError(f"unknown problem family {family!r}")
    allowed = FAMILY_PARAMS[family]
    for key in params or {}:
        if key not in allowed:
            raise ConfigError(f"unknown field {where}.{key}")
    for sub in ("phi1", "phi2"):
        if sub in allowed and sub in (params or {}):
            for key in params[sub] or {}:
                if key not in _PHI_PARAMS:
                    raise ConfigError(f"unknown field {where}.{sub}.{key}")


def build(family: str, params: dict) -> Problem:
    """Build a shipped family from plain configuration parameters."""
    params = dict(params or {})
    validate_params(family, params)
    if family == "quadratic_over_ball":
        return build_quadratic_over_ball(
            params.get("target", [1.05, 0.0]),
            m=params.get("m", 1),
            center=params.get("center"),
            radius=params.get("radius", 1.0),
            squared=params.get("squared", True),
        )
    if family == "affine_vi_over_polyhedron":
        matrix = _as_matrix(params.get("matrix", [[0.0, 0.2], [-0.2, 0.0]]), "matrix")
        offset = params.get("offset", [-0.1, -0.05])
        if "rows" in params or "rhs" in params:
            if "rows" not in params or "rhs" not in params:
                raise ConfigError("rows and rhs must be given together")
            return build_affine_vi_over_polyhedron(
                matrix,
                offset,
                rows=params["rows"],
                rhs=params["rhs"],
                interior_point=params.get("interior_point"),
                m=params.get("m", 1),
            )
        box = params.get("box", [[0.0, 0.0], [1.0, 1.0]])
        return build_affine_vi_over_polyhedron(
            matrix, offset, box=(box[0], box[1]), m=params.get("m", 1)
        )
    if family == "a1":
        target = as_point(params.get("target", [0.05, 0.0]))
        n = target.size
        kind = params.get("objective", "relu")
        op = AffineOperator(np.eye(n), -target, label="pull_to_target")
        if kind == "relu":
            # f = max(x_1, 0); the minimizer set is the halfspace {x_1 <= 0}
            # and the gauge itself is the exact distance to it.
            rows = np.zeros((2, n))
            rows[0, 0] = 1.0
            objective = MaxOfAffine(rows, np.zeros(2), label="relu")
            solution = target.copy()
            solution[0] = min(solution[0], 0.0)
            prob = build_a1(
                op,
                objective,
                f_min=0.0,
                surrogate=lambda y: max(float(y[0]), 0.0),
                known_solution=solution,
            )
        elif kind in ("norm", "sqnorm"):
            if kind == "norm":
                objective = NormFunction(np.zeros(n), label="norm_objective")
            else:
                objective = Quadratic.half_sq_distance(np.zeros(n), label="sq_objective")
            # Both objectives have the origin as unique minimizer.
            prob = build_a1(
                op,
                objective,
                f_min=0.0,
                exact_set=BallSet(np.zeros(n), 0.0),
                known_solution=np.zeros(n),
            )
        else:
            raise ConfigError(f"unknown a1 objective {kind!r}")
        prob.meta.update({"target": target.tolist(), "objective": kind})
        return prob
    if family == "a2":
        L = _as_matrix(params.get("matrix", 2.0), "matrix")
        phi1 = _quadratic_from_params(params.get("phi1", {}), L.shape[0], "phi1")
        phi2 = _quadratic_from_params(
            params.get("phi2", {"center": [4.0]}), L.shape[1], "phi2"
        )
        return build_a2(L, phi1, phi2)
    if family == "a3":
        L = _as_matrix(params.get("matrix", 1.0), "matrix")
        phi1 = _quadratic_from_params(params.get("phi1", {}), L.shape[0], "phi1")
        phi2 = _quadratic_from_params(params.get("phi2", {}), L.shape[0], "phi2")
        return build_a3(L, phi1, phi2)
    raise ConfigError(f"unknown problem family {family!r}")


FAMILIES = (
    "quadratic_over_ball",
    "affine_vi_over_polyhedron",
    "a1",
    "a2",
    "a3",
)
