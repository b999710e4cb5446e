"""Exception hierarchy shared by all hgtlab modules."""

from __future__ import annotations

from typing import Any


class HGTLabError(Exception):
    """Base class for every error raised by hgtlab."""


class ConfigurationError(HGTLabError, ValueError):
    """Bad user configuration (unknown kernel, missing field, out of range)."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class DomainError(HGTLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class KernelError(HGTLabError):
    """A transfer kernel does not have the structure the analysis needs."""


class NumericalError(HGTLabError, ArithmeticError):
    """A numerical procedure failed (non-finite value, stability violation)."""

    def __init__(self, message: str, snapshot: dict[str, Any] | None = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class ConvergenceError(NumericalError):
    """An iterative solver did not converge; ``last_iterate`` holds its final state."""

    def __init__(self, message: str, last_iterate: Any = None):
        super().__init__(message)
        self.last_iterate = last_iterate
