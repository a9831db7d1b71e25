"""Exception types shared across the solver modules."""


class QuadchError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(QuadchError):
    """Fields defined on different grids were combined."""


class NonFiniteFieldError(QuadchError):
    """A field contains NaN or Inf entries."""


class SingularConstraintError(QuadchError):
    """An auxiliary variable cannot be evaluated at the given point."""


class SingularLiftError(QuadchError):
    """Constraint Jacobian aux-block is rank deficient at the evaluation point."""

    def __init__(self, msg, cond=None):
        super().__init__(msg)
        self.cond = cond


class NonConvergenceError(QuadchError):
    """Fixed-point iteration failed to converge; carries the solve report."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class StepFailureError(QuadchError):
    """A time step could not be completed; carries solver diagnostics."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class SingularUpdateError(QuadchError):
    """Closed-form reciprocal update hit a non-positive denominator."""

    def __init__(self, msg, locations=None):
        super().__init__(msg)
        self.locations = locations


class PoleError(QuadchError):
    """Rational amplification factor evaluated at a pole of its denominator."""


class FieldFormatError(QuadchError):
    """Snapshot file is malformed, truncated, or has an unknown version."""
