"""Exception hierarchy shared by all modules."""


class NNMError(Exception):
    """Base class for errors raised by this package."""


class DomainError(NNMError, ValueError):
    """State outside the admissible chart of a model (non-finite evaluation)."""


class SingularMassError(NNMError, ValueError):
    def __init__(self, q):
        self.q = q
        super().__init__(f"mass matrix is singular at q={q!r}")


class IntegrationError(NNMError, RuntimeError):
    """Time integration failed (step-size underflow or blow-up).

    ``last_time`` holds the last time at which the state was finite.
    """

    def __init__(self, message, last_time):
        self.last_time = last_time
        super().__init__(f"{message} (last good time t={last_time:.17g})")


class ConvergenceError(NNMError, RuntimeError):
    """Newton iteration or quadrature refinement did not converge."""


class DegeneracyError(NNMError, RuntimeError):
    """Singular bordered system, loss of normality or a similar degeneracy."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ContinuationError(NNMError, RuntimeError):
    """Continuation stopped because the step size underflowed."""


class ConfigError(NNMError, ValueError):
    """Invalid run configuration; ``line`` is 1-based when known.

    The message itself is expected to name the source and line.
    """

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message)
