"""Selection oracles for monotone operators and convex functions.

Set-valued maps are exposed through deterministic single-valued selections:
the solver only ever needs one element of ``T(x)`` per visit. At kinks the
selection returns the minimum-norm subgradient where that is cheap to
compute; otherwise the tie-break convention is documented on the oracle.

Monotonicity of the shipped affine family is enforced at construction time
(symmetric part positive semidefinite, tolerance ``-1e-10`` on the smallest
eigenvalue). Subgradient oracles of convex functions are monotone by
construction.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue
from .space import Vector, as_point

_PSD_TOL = -1e-10


class Operator:
    """Deterministic selection oracle for a monotone operator on R^dim."""

    def __init__(self, dim: int, label: str = ""):
        dim = int(dim)
        if dim < 1:
            raise DimensionMismatch("operator dimension must be at least 1")
        self.dim = dim
        self.label = label or type(self).__name__

    def select(self, x: Vector) -> Vector:
        """Return one element of T(x)."""
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"{type(self).__name__}(dim={self.dim}, label={self.label!r})"


class AffineOperator(Operator):
    """x -> A x + b, monotone exactly when the symmetric part of A is PSD."""

    def __init__(self, matrix, offset=None, label: str = "affine"):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise NonFiniteValue("matrix has non-finite entries")
        sym = 0.5 * (A + A.T)
        lo = float(np.linalg.eigvalsh(sym).min())
        if lo < _PSD_TOL:
            raise ValueError(
                f"affine map is not monotone: symmetric part has eigenvalue {lo:.3e}"
            )
        super().__init__(A.shape[0], label)
        self.matrix = A
        self.offset = (
            np.zeros(self.dim) if offset is None else as_point(offset, self.dim)
        )

    def select(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        return self.matrix @ x + self.offset


class GradientOperator(Operator):
    """Subgradient selection of a convex function, monotone by convexity."""

    def __init__(self, fn: "ConvexFunction", label: str = ""):
        super().__init__(fn.dim, label or f"subgrad[{fn.label}]")
        self.fn = fn

    def select(self, x: Vector) -> Vector:
        return self.fn.subgradient(x)


class ZeroOperator(Operator):
    """The zero map; monotone and a neutral element for operator sums."""

    def select(self, x: Vector) -> Vector:
        as_point(x, self.dim)
        return np.zeros(self.dim)


class ScaledOperator(Operator):
    """t * T for t >= 0; nonnegative scaling preserves monotonicity."""

    def __init__(self, base: Operator, factor: float, label: str = ""):
        factor = float(factor)
        if not np.isfinite(factor) or factor < 0:
            raise ValueError("scale factor must be finite and nonnegative")
        super().__init__(base.dim, label or f"{factor}*{base.label}")
        self.base = base
        self.factor = factor

    def select(self, x: Vector) -> Vector:
        return self.factor * self.base.select(x)


class EmbeddedOperator(Operator):
    """Apply a lower-dimensional operator to one block of the coordinates.

    The result is zero-padded outside the block, which keeps monotonicity:
    the pairing only sees the block the base operator acts on.
    """

    def __init__(self, dim: int, base: Operator, start: int, label: str = ""):
        super().__init__(dim, label or f"embed[{base.label}]")
        start = int(start)
        if start < 0 or start + base.dim > dim:
            raise DimensionMismatch("embedded block does not fit the ambient space")
        self.base = base
        self.start = start

    def select(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        out = np.zeros(self.dim)
        block = self.base.select(x[self.start : self.start + self.base.dim])
        out[self.start : self.start + self.base.dim] = block
        return out


def sum_select(oracles, x) -> Vector:
    """Sum of one selection from each oracle at ``x`` (an element of (T1+...+Tm)(x))."""
    oracles = list(oracles)
    if not oracles:
        raise ValueError("sum_select needs at least one oracle")
    x = as_point(x, oracles[0].dim)
    out = np.zeros(oracles[0].dim)
    for op in oracles:
        if op.dim != out.size:
            raise DimensionMismatch("oracles act on spaces of different dimensions")
        out += op.select(x)
    return out


class LinearMap:
    """Dense linear map between coordinate spaces, with its adjoint."""

    def __init__(self, matrix, label: str = "L"):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2:
            raise DimensionMismatch(f"linear map must be a matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise NonFiniteValue("linear map has non-finite entries")
        self.matrix = M
        self.label = label

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: Vector) -> Vector:
        return self.matrix @ as_point(x, self.in_dim)

    def adjoint_apply(self, y: Vector) -> Vector:
        return self.matrix.T @ as_point(y, self.out_dim)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        if self.in_dim != self.out_dim:
            return False
        return bool(np.max(np.abs(self.matrix - self.matrix.T)) <= tol)


class ConvexFunction:
    """Convex function with a one-element subgradient selection.

    ``differentiable`` advertises smoothness; families that can hit a kink
    leave it False so callers needing gradients can reject them early.
    """

    differentiable = False

    def __init__(self, dim: int, label: str = ""):
        dim = int(dim)
        if dim < 1:
            raise DimensionMismatch("function dimension must be at least 1")
        self.dim = dim
        self.label = label or type(self).__name__

    def value(self, x: Vector) -> float:
        raise NotImplementedError

    def subgradient(self, x: Vector) -> Vector:
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"{type(self).__name__}(dim={self.dim}, label={self.label!r})"


class Quadratic(ConvexFunction):
    """0.5 x'Qx + b'x + c with Q symmetric PSD (checked at construction)."""

    differentiable = True

    def __init__(self, Q, b=None, constant: float = 0.0, label: str = "quadratic"):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got shape {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise NonFiniteValue("Q has non-finite entries")
        Q = 0.5 * (Q + Q.T)
        lo = float(np.linalg.eigvalsh(Q).min())
        if lo < _PSD_TOL:
            raise ValueError(f"quadratic is not convex: Q has eigenvalue {lo:.3e}")
        super().__init__(Q.shape[0], label)
        self.Q = Q
        self.b = np.zeros(self.dim) if b is None else as_point(b, self.dim)
        self.constant = float(constant)

    @classmethod
    def half_sq_distance(cls, center, weight: float = 1.0, label: str = "") -> "Quadratic":
        """0.5 * weight * ||x - center||^2."""
        center = as_point(center)
        w = float(weight)
        if w < 0:
            raise ValueError("weight must be nonnegative")
        n = center.size
        return cls(
            w * np.eye(n),
            -w * center,
            0.5 * w * float(center @ center),
            label or f"half_sq_dist(w={w})",
        )

    def value(self, x: Vector) -> float:
        x = as_point(x, self.dim)
        return float(0.5 * x @ self.Q @ x + self.b @ x + self.constant)

    def subgradient(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        return self.Q @ x + self.b


class NormFunction(ConvexFunction):
    """scale * ||x - center|| + offset.

    At the center the subdifferential is the scaled unit ball; the selection
    returns its minimum-norm element, the zero vector.
    """

    def __init__(self, center, scale: float = 1.0, offset: float = 0.0, label: str = "norm"):
        center = as_point(center)
        scale = float(scale)
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        super().__init__(center.size, label)
        self.center = center
        self.scale = scale
        self.offset = float(offset)

    def value(self, x: Vector) -> float:
        x = as_point(x, self.dim)
        return self.scale * float(np.linalg.norm(x - self.center)) + self.offset

    def subgradient(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        d = x - self.center
        r = float(np.linalg.norm(d))
        if r == 0.0:
            return np.zeros(self.dim)
        return (self.scale / r) * d


class MaxOfAffine(ConvexFunction):
    """max_i (<a_i, x> - b_i).

    On ties, the selection returns the row of the first maximizer (lowest
    index); the minimum-norm element of the convex hull of active rows is a
    small program in its own right, so the first-row convention is used and
    documented instead.
    """

    def __init__(self, rows, rhs, label: str = "max_affine"):
        A = np.asarray(rows, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1:
            raise DimensionMismatch(f"rows must be a nonempty matrix, got {A.shape}")
        b = np.asarray(rhs, dtype=float).reshape(-1)
        if b.size != A.shape[0]:
            raise DimensionMismatch("one right-hand side per row is required")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise NonFiniteValue("rows or rhs have non-finite entries")
        super().__init__(A.shape[1], label)
        self.rows = A
        self.rhs = b

    def value(self, x: Vector) -> float:
        x = as_point(x, self.dim)
        return float(np.max(self.rows @ x - self.rhs))

    def subgradient(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        i = int(np.argmax(self.rows @ x - self.rhs))
        return self.rows[i].copy()


class AffineFunction(ConvexFunction):
    """<a, x> + c; its subgradient is constant."""

    differentiable = True

    def __init__(self, slope, constant: float = 0.0, label: str = "affine"):
        slope = as_point(slope)
        super().__init__(slope.size, label)
        self.slope = slope
        self.constant = float(constant)

    def value(self, x: Vector) -> float:
        x = as_point(x, self.dim)
        return float(self.slope @ x) + self.constant

    def subgradient(self, x: Vector) -> Vector:
        as_point(x, self.dim)
        return self.slope.copy()


class LogSumExp(ConvexFunction):
    """log(sum exp(x_i)), a smooth convex test function for gradient checks."""

    differentiable = True

    def __init__(self, dim: int, label: str = "logsumexp"):
        super().__init__(dim, label)

    def value(self, x: Vector) -> float:
        x = as_point(x, self.dim)
        m = float(np.max(x))
        return m + float(np.log(np.sum(np.exp(x - m))))

    def subgradient(self, x: Vector) -> Vector:
        x = as_point(x, self.dim)
        e = np.exp(x - np.max(x))
        return e / e.sum()


class ConstantFunction(ConvexFunction):
    """Constant map; convex, with zero subgradient everywhere."""

    differentiable = True

    def __init__(self, dim: int, constant: float, label: str = "constant"):
        super().__init__(dim, label)
        self.constant = float(constant)

    def value(self, x: Vector) -> float:
        as_point(x, self.dim)
        return self.constant

    def subgradient(self, x: Vector) -> Vector:
        as_point(x, self.dim)
        return np.zeros(self.dim)


class ShiftedFunction(ConvexFunction):
    """base - delta, used to turn an objective into a sublevel description."""

    def __init__(self, base: ConvexFunction, delta: float, label: str = ""):
        super().__init__(base.dim, label or f"{base.label}-{delta}")
        self.base = base
        self.delta = float(delta)
        self.differentiable = base.differentiable

    def value(self, x: Vector) -> float:
        return self.base.value(x) - self.delta

    def subgradient(self, x: Vector) -> Vector:
        return self.base.subgradient(x)
