"""Exception hierarchy shared by the library and the command line front-end."""


class CVQPTError(Exception):
    """Base class for all package errors."""


class ValidationError(CVQPTError, ValueError):
    """Invalid user input (parameters, configs, expressions)."""


class ExpressionError(ValidationError):
    """A kernel expression failed to parse or uses a forbidden identifier.

    ``position`` is the 0-based column offset into the source text, when known.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at column {position})"
        super().__init__(message)


class NumericalError(CVQPTError, ArithmeticError):
    """Base class for failures during numerical evaluation."""


class IntegrandError(NumericalError):
    """An integrand produced a non-finite sample."""

    def __init__(self, point, value):
        self.point = tuple(float(p) for p in point)
        self.value = value
        super().__init__(f"non-finite integrand value {value!r} at {self.point}")


class UnphysicalKernelError(NumericalError):
    """Outcome probabilities fell outside [0, 1] beyond the quadrature error."""


class CoverageError(NumericalError):
    """A mesh of estimates cannot be turned into a kernel surrogate."""


class GridMismatchError(NumericalError):
    """Two Choi grids do not share positions or squeezing weight."""


class NonConvergenceError(CVQPTError):
    """Adaptive refinement hit ``max_depth`` without meeting the flatness test.

    Carries the last central estimate and the worst spread ratio observed.
    """

    def __init__(self, message, last_estimate=None, worst_ratio=None):
        self.last_estimate = last_estimate
        self.worst_ratio = worst_ratio
        super().__init__(message)
