"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class OptimizationError(RuntimeError):
    """No finite objective value was found during maximization."""


class UsageError(Exception):
    """Invalid command-line invocation."""
