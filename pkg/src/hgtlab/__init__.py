"""Evolutionary stable strategies and a PDE solver for a selection-mutation model
with horizontal gene transfer."""

from .errors import ConfigurationError, ConvergenceError, DomainError, HGTLabError, KernelError, NumericalError
from .kernels import ModelParams, PhysicalParams, TransferKernel, adimensionalize, growth, make_kernel, validate_h1

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "HGTLabError",
    "KernelError",
    "ModelParams",
    "NumericalError",
    "PhysicalParams",
    "TransferKernel",
    "adimensionalize",
    "growth",
    "make_kernel",
    "validate_h1",
]
