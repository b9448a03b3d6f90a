"""Exception types shared across the package."""


class ChristoffelLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChristoffelLabError):
    """Invalid sizes, parameters or experiment configuration."""


class DimensionError(ChristoffelLabError):
    """Mismatched matrix, grid or field dimensions."""


class GeometryError(ChristoffelLabError):
    """Geometric preconditions violated (non-unit vector, non-tangent direction)."""


class AliasingError(ChristoffelLabError):
    """Requested harmonic degree exceeds what the grid can resolve."""


class DomainError(ChristoffelLabError):
    """Input outside the admissible domain (nonpositive density, tiny radius)."""


class EllipticityError(ChristoffelLabError):
    """Coefficient tensor not positive definite somewhere.

    Carries the offending node index and the eigenvalue margin there.
    """

    def __init__(self, node, margin):
        self.node = node
        self.margin = margin
        super().__init__(f"coefficient tensor not elliptic at node {node} (margin {margin:.3e})")


class CompatibilityError(ChristoffelLabError):
    """First-harmonic moments of the data do not vanish."""

    def __init__(self, moments, tol):
        self.moments = tuple(float(m) for m in moments)
        self.tol = tol
        pretty = ", ".join(f"{m:.3e}" for m in self.moments)
        super().__init__(f"compatibility moments ({pretty}) exceed tolerance {tol:.3e}")


class ConvergenceError(ChristoffelLabError):
    """Solve finished with a residual above the requested tolerance."""

    def __init__(self, residual, tol):
        self.residual = residual
        self.tol = tol
        super().__init__(f"residual {residual:.3e} above tolerance {tol:.3e}")


class ConditioningError(ChristoffelLabError):
    """Rank-deficient or numerically singular linear system."""
