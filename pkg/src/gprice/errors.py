"""Exception hierarchy shared by every gprice module."""


class GPriceError(Exception):
    """Base class for all errors raised by gprice."""


class ConfigError(GPriceError, ValueError):
    """Inconsistent numerical or run configuration."""


class DomainError(GPriceError, ValueError):
    """An input lies outside the domain of a function."""


class RangeError(DomainError):
    """An evaluation point lies outside a grid."""


class NumericalError(GPriceError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class InversionError(NumericalError):
    """A monotone inverse could not be bracketed."""


class CapacityError(GPriceError):
    """A brute-force routine was asked for more work than it allows."""


class AlignmentError(GPriceError, ValueError):
    """Monitoring times do not fall on lattice step boundaries."""
