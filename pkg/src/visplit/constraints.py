"""Feasible-set machinery: sublevel constraints, halfspaces, projections.

The feasible set is C = {x : c(x) <= 0} for a convex ``c``. The solver never
projects onto C directly; it projects onto separating halfspaces built from
subgradients of ``c``:

    C_z = {x : c(z) + <g, x - z> <= 0},  g in the subdifferential of c at z,

optionally intersected with the localizer

    W_{z,w} = {x : <x - z, w - z> <= 0}.

Both projections have closed forms. The pair projection is solved by direct
case analysis over the active constraints (none, one, or both), which gives
the exact projector for every configuration, including parallel boundaries;
the two-active case solves a 2x2 Gram system for the multipliers and keeps
the candidate only when it is feasible, so no multiplier clamping heuristics
are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InfeasibleConstraint,
    NonFiniteValue,
)
from .operators import ConvexFunction
from .space import Vector, as_point


@dataclass(frozen=True, eq=False)
class Halfspace:
    """Closed halfspace {x : <normal, x> <= offset}.

    A zero normal with nonnegative offset denotes the whole space. A zero
    normal with negative offset would be empty and is rejected.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = as_point(self.normal)
        offset = float(self.offset)
        if not np.isfinite(offset):
            raise NonFiniteValue("halfspace offset must be finite")
        sq = float(normal @ normal)
        if sq == 0.0 and offset < 0.0:
            raise InfeasibleConstraint("zero normal with negative offset is empty")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "_sq", sq)

    @classmethod
    def whole_space(cls, dim: int) -> "Halfspace":
        return cls(np.zeros(int(dim)), 0.0)

    @property
    def dim(self) -> int:
        return self.normal.size

    @property
    def is_whole_space(self) -> bool:
        return self._sq == 0.0

    def residual(self, y) -> float:
        """<normal, y> - offset; positive outside, nonpositive inside."""
        y = as_point(y, self.dim)
        return float(self.normal @ y) - self.offset

    def contains(self, y, tol: float = 0.0) -> bool:
        return self.residual(y) <= tol

    def project(self, y) -> Vector:
        y = as_point(y, self.dim)
        if self._sq == 0.0:
            return y.copy()
        r = float(self.normal @ y) - self.offset
        if r <= 0.0:
            return y.copy()
        return y - (r / self._sq) * self.normal

    def distance(self, y) -> float:
        if self._sq == 0.0:
            return 0.0
        return max(0.0, self.residual(y)) / float(np.sqrt(self._sq))


def project_halfspace(halfspace: Halfspace, y) -> Vector:
    """Exact projection of ``y`` onto a halfspace."""
    return halfspace.project(y)


def project_halfspace_pair(sep: Halfspace, z, w) -> Vector:
    """Exact projection of ``w`` onto sep ∩ {x : <x - z, w - z> <= 0}.

    Candidates are enumerated by active set: ``w`` itself, the single
    projections onto each halfspace, and the point with both boundaries
    active (2x2 Gram system in the multipliers). The closest feasible
    candidate is the projection. When the normals are parallel the Gram
    system is skipped and a single halfspace is necessarily binding.

    Degenerate localizer (w == z) falls back to the single projection onto
    ``sep``. Raises InfeasibleConstraint if the intersection is empty, which
    cannot happen for separators of a nonempty feasible set.
    """
    z = as_point(z, sep.dim)
    w = as_point(w, sep.dim)
    d = w - z
    dd = float(d @ d)
    if dd == 0.0:
        return sep.project(w)

    loc = Halfspace(d, float(d @ z))
    tol = 1e-10 * max(1.0, float(np.linalg.norm(w)), float(np.linalg.norm(z)))

    if sep.distance(w) <= tol and loc.distance(w) <= tol:
        return w.copy()
    candidates = []
    p1 = sep.project(w)
    if loc.distance(p1) <= tol:
        candidates.append(p1)
    p2 = loc.project(w)
    if sep.distance(p2) <= tol:
        candidates.append(p2)
    if not candidates and not sep.is_whole_space:
        a = sep.normal
        aa = float(a @ a)
        ad = float(a @ d)
        det = aa * dd - ad * ad
        if det > 1e-14 * aa * dd:
            q = w
            # Refinement passes keep the vertex accurate on thin wedges,
            # where the Gram system loses digits to near-parallel normals.
            for _ in range(3):
                ra = sep.residual(q)
                rd = loc.residual(q)
                mu1 = (ra * dd - ad * rd) / det
                mu2 = (aa * rd - ad * ra) / det
                q = q - mu1 * a - mu2 * d
            if sep.distance(q) <= tol and loc.distance(q) <= tol:
                candidates.append(q)
    if not candidates:
        raise InfeasibleConstraint("halfspace pair has empty intersection")
    best = min(candidates, key=lambda p: float((p - w) @ (p - w)))
    return best


class ExactSet:
    """Closed convex set with an exact projector and distance."""

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise DimensionMismatch("set dimension must be at least 1")
        self.dim = dim

    def project(self, y) -> Vector:
        raise NotImplementedError

    def distance(self, y) -> float:
        y = as_point(y, self.dim)
        return float(np.linalg.norm(y - self.project(y)))

    def contains(self, y, tol: float = 0.0) -> bool:
        return self.distance(y) <= tol


class WholeSpace(ExactSet):
    """The ambient space; projection is the identity."""

    def project(self, y) -> Vector:
        return as_point(y, self.dim).copy()

    def distance(self, y) -> float:
        as_point(y, self.dim)
        return 0.0


class BallSet(ExactSet):
    """Euclidean ball; radius zero gives a singleton."""

    def __init__(self, center, radius: float):
        center = as_point(center)
        radius = float(radius)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        super().__init__(center.size)
        self.center = center
        self.radius = radius

    def project(self, y) -> Vector:
        y = as_point(y, self.dim)
        d = y - self.center
        r = float(np.linalg.norm(d))
        if r <= self.radius:
            return y.copy()
        if r == 0.0:
            return self.center.copy()
        return self.center + (self.radius / r) * d

    def distance(self, y) -> float:
        y = as_point(y, self.dim)
        return max(0.0, float(np.linalg.norm(y - self.center)) - self.radius)


class BoxSet(ExactSet):
    """Axis-aligned box [lo, hi]; projection clamps componentwise."""

    def __init__(self, lo, hi):
        lo = as_point(lo)
        hi = as_point(hi, lo.size)
        if np.any(lo > hi):
            raise ValueError("box has lo > hi in some coordinate")
        super().__init__(lo.size)
        self.lo = lo
        self.hi = hi

    def project(self, y) -> Vector:
        y = as_point(y, self.dim)
        return np.clip(y, self.lo, self.hi)


class GraphSet(ExactSet):
    """Graph subspace {(x, y) : L x = y} of a linear map, stacked as one vector.

    Projection solves the normal equations (I + L'L) x = x0 + L'y0, which is
    the exact least-squares projection onto the subspace.
    """

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2:
            raise DimensionMismatch("graph set needs a matrix")
        super().__init__(M.shape[1] + M.shape[0])
        self.matrix = M
        self.n = M.shape[1]
        self.p = M.shape[0]
        self._solve = np.linalg.inv(np.eye(self.n) + M.T @ M)

    def split(self, v) -> tuple[Vector, Vector]:
        v = as_point(v, self.dim)
        return v[: self.n], v[self.n :]

    def project(self, y) -> Vector:
        x0, y0 = self.split(y)
        x = self._solve @ (x0 + self.matrix.T @ y0)
        return np.concatenate([x, self.matrix @ x])


def exact_project(region: ExactSet | Halfspace, y) -> Vector:
    """Exact projection onto a set carrying a closed-form projector."""
    return region.project(y)


class Constraint:
    """Sublevel description {x : value(x) <= 0} of the feasible set.

    Bundles the convex function with one distance rule used by the stopping
    test of the feasibility loop. ``dist_upper`` returns 0 at feasible points
    and otherwise an upper bound on the Euclidean distance to the set, from
    the first available source in order of preference:

    - ``exact_set``: closed-form projector, distance is exact;
    - ``surrogate``: caller-supplied bound, must vanish exactly on the set
      boundary and majorize the true distance;
    - ``slater_point``: a strictly feasible w, giving the bound
      ||y - w|| * c(y) / (c(y) - c(w)) valid whenever c(y) > 0.
    """

    def __init__(
        self,
        fn: ConvexFunction,
        exact_set: ExactSet | Halfspace | None = None,
        surrogate=None,
        slater_point=None,
        label: str = "",
    ):
        self.fn = fn
        self.dim = fn.dim
        self.label = label or fn.label
        if exact_set is not None and exact_set.dim != fn.dim:
            raise DimensionMismatch("exact set and constraint dimensions differ")
        self.exact_set = exact_set
        self.surrogate = surrogate
        if slater_point is not None:
            slater_point = as_point(slater_point, fn.dim)
            cw = fn.value(slater_point)
            if not cw < 0:
                raise ConfigError(
                    f"slater point must be strictly feasible, got c(w) = {cw!r}"
                )
            self._slater_value = cw
        self.slater_point = slater_point
        if exact_set is None and surrogate is None and slater_point is None:
            raise ConfigError(
                "constraint needs a distance rule: exact_set, surrogate, or slater_point"
            )

    @property
    def dist_mode(self) -> str:
        if self.exact_set is not None:
            return "exact"
        if self.surrogate is not None:
            return "surrogate"
        return "slater"

    def value(self, y) -> float:
        return self.fn.value(y)

    def subgradient(self, y) -> Vector:
        return self.fn.subgradient(y)

    def dist_upper(self, y) -> float:
        y = as_point(y, self.dim)
        cy = self.fn.value(y)
        if cy <= 0.0:
            return 0.0
        if self.exact_set is not None:
            return self.exact_set.distance(y)
        if self.surrogate is not None:
            return float(self.surrogate(y))
        w = self.slater_point
        return float(np.linalg.norm(y - w)) * cy / (cy - self._slater_value)

    def separator_at(self, y) -> Halfspace:
        """Halfspace {x : c(y) + <g, x - y> <= 0} containing the feasible set.

        With g = 0 the linearization is constant: if c(y) > 0 the constraint
        certifies an unattainable positive minimum and the construction
        fails; otherwise the separator is the whole space.
        """
        y = as_point(y, self.dim)
        cy = self.fn.value(y)
        g = as_point(self.fn.subgradient(y), self.dim)
        if float(g @ g) == 0.0:
            if cy > 0.0:
                raise InfeasibleConstraint(
                    "zero subgradient at an infeasible point: feasible set is empty"
                )
            return Halfspace.whole_space(self.dim)
        return Halfspace(g, float(g @ y) - cy)


def separator_at(constraint: Constraint, y) -> Halfspace:
    """Separating halfspace of the feasible set built at ``y``."""
    return constraint.separator_at(y)


def dist_upper(constraint: Constraint, y) -> float:
    """Upper bound on dist(y, C); zero exactly when c(y) <= 0."""
    return constraint.dist_upper(y)
