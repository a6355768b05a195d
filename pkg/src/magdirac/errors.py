"""Exception hierarchy shared by all modules."""


class MagdiracError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class InvalidInputError(MagdiracError, ValueError):
    exit_code = 2


class ConfigError(MagdiracError, ValueError):
    exit_code = 2


class NumericalError(MagdiracError, ArithmeticError):
    exit_code = 3


class TruncationError(NumericalError):
    """A truncation level (Hermite order, Landau level cut) is too small."""


class AccuracyError(NumericalError):
    """Quadrature or refinement failed to reach the requested tolerance."""


class SymmetryError(NumericalError):
    """A result that must be real/Hermitian is not, beyond tolerance."""


class IntegrationError(NumericalError):
    """ODE integration failed (step underflow, energy drift)."""


class InsufficientDataError(NumericalError):
    pass
