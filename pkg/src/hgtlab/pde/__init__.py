"""Hopf-Cole finite-difference solver for the selection-mutation-transfer PDE."""

from .mass import solve_mass
from .operators import ghost_values, grad_sq, laplacian, transfer_matrix
from .scheme import (
    Grid1D,
    PdeState,
    SimConfig,
    SimReport,
    extract_support,
    init_state,
    intermediate,
    run,
    solve_mass_equation,
    solve_rho,
    steady_diagnostics,
    step,
    step_arrays,
    transfer_term,
)

__all__ = [
    "Grid1D",
    "PdeState",
    "SimConfig",
    "SimReport",
    "extract_support",
    "ghost_values",
    "grad_sq",
    "init_state",
    "intermediate",
    "laplacian",
    "run",
    "solve_mass",
    "solve_mass_equation",
    "solve_rho",
    "steady_diagnostics",
    "step",
    "step_arrays",
    "transfer_matrix",
    "transfer_term",
]
