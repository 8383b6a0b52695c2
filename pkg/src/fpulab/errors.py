"""Exception hierarchy shared by all fpulab modules."""


class FPULabError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(FPULabError, ValueError):
    """Malformed or inconsistent input (shapes, ranges, parameter pairing)."""


class DomainError(FPULabError, ArithmeticError):
    """A value falls outside the region where a formula is safe to evaluate."""


class InsufficientDataError(FPULabError, ValueError):
    """Too few usable points to fit or estimate something."""


class StabilityError(FPULabError, ArithmeticError):
    """A time step violates the solver's stability limit."""


class NumericalError(FPULabError, ArithmeticError):
    """A numerical routine (eigensolver, etc.) failed."""


class CalibrationError(FPULabError, RuntimeError):
    """Sampler adaptation could not reach an acceptable acceptance rate."""


class BlowUpError(FPULabError, ArithmeticError):
    """Trajectory left the finite region; carries the time and any partial output."""

    def __init__(self, message, t=None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial
