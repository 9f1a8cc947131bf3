"""Exception types shared across the package."""


class VisplitError(Exception):
    """Base class for package-specific errors."""


class DimensionMismatch(VisplitError, ValueError):
    """Operands live in coordinate spaces of different dimensions."""


class NonFiniteValue(VisplitError, ValueError):
    """A NaN or infinity tried to enter a computation."""


class NonFiniteIterate(NonFiniteValue):
    """An iterate left the finite floating-point range mid-run."""


class InfeasibleConstraint(VisplitError, RuntimeError):
    """No feasible point exists for the requested construction."""


class IterationBudgetExceeded(VisplitError, RuntimeError):
    """An iterative routine hit its iteration cap before its exit test."""


class ConfigError(VisplitError, ValueError):
    """A run configuration or parameter failed validation."""
