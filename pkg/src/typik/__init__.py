"""Maximum typicality estimation and typicality contours."""

__version__ = "0.1.0"

from .errors import DomainError, OptimizationError, UsageError  # noqa: E402

__all__ = ["__version__", "DomainError", "OptimizationError", "UsageError"]
