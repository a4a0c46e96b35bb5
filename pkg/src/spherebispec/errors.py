"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ParityError(DomainError):
    """Multipole triple with odd l1 + l2 + l3 where an even sum is required."""


class NumericGuardError(RuntimeError):
    """Base class for guards that refuse to return an inexact answer."""


class AliasingError(NumericGuardError):
    """Quadrature grid too coarse for the requested transform."""


class ResourceGuardError(NumericGuardError):
    """Brute-force computation would exceed its configured size limit."""
