"""Exception hierarchy shared by all qlbm modules."""


class QLBMError(Exception):
    """Base class for every error raised by this package."""


class LayoutError(QLBMError, ValueError):
    """Qubit index, register size or field length does not fit the layout."""


class DomainError(QLBMError, ValueError):
    """Input lies outside the mathematical domain (negative density, zero mass, ...)."""


class AdmissibilityError(DomainError):
    """Velocity outside the range where the collision angles are defined."""


class StateError(QLBMError, ValueError):
    """State is not in the form an operation requires (e.g. f-register not reset)."""


class DegeneracyError(QLBMError, ArithmeticError):
    """Numerically degenerate situation: zero-probability branch, zero density cell."""


class ConfigError(QLBMError, ValueError):
    """Invalid experiment configuration."""
