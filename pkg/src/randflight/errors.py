"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to reach its accuracy or range target."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate could not be formed (e.g. empty conditioning set)."""
