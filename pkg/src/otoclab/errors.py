"""Exception hierarchy shared by all otoclab modules."""


class OtocLabError(Exception):
    """Base class for every error raised by this package."""


class ContractError(OtocLabError, ValueError):
    """Arguments violate a documented precondition (shape, range, sign)."""


class ChartBoundaryError(OtocLabError, ValueError):
    """A point is outside, or too close to the edge of, its chart domain."""


class StiffnessError(OtocLabError, RuntimeError):
    """The integrator could not continue because the step size underflowed."""


class ConvergenceError(OtocLabError, RuntimeError):
    """An iterative solver did not reach its tolerance."""


class DegenerateError(OtocLabError, RuntimeError):
    """A linear system or design matrix is singular."""


class ContinuationBreak(OtocLabError, RuntimeError):
    """A continuation step jumped off the branch.

    The solutions found before the break are kept in ``partial``.
    """

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = list(partial)


class EmptyShellError(OtocLabError, ValueError):
    """No initial condition lies on the requested energy shell and plane."""


class ResourceError(OtocLabError, MemoryError):
    """A dense model would exceed the configured dimension cap."""


class NormalizationError(OtocLabError, ValueError):
    """A state label or amplitude vector cannot be normalised."""


class NoSolutionError(OtocLabError, RuntimeError):
    """A constrained point search found no feasible point."""


class FitError(OtocLabError, RuntimeError):
    """A nonlinear fit failed or produced no admissible result."""


class CalibrationError(FitError):
    """No window reproduces the reference growth rate within tolerance."""


class ConfigError(OtocLabError, ValueError):
    """An experiment configuration is invalid."""


class DegenerateSeedWarning(UserWarning):
    """Lyapunov seeds started on a fixed point measure the local exponent."""
