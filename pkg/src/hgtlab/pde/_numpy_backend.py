"""Pure-numpy time stepping (fallback when numba is absent or disabled)."""

from __future__ import annotations

import math

import numpy as np

from .mass import solve_mass
from .operators import TRANSFER_CUTOFF, grad_sq, laplacian, transfer_sum

STATUS_RUNNING = 0
STATUS_STEADY = 1
STATUS_NONFINITE = 2
STATUS_UNSTABLE = 3


def advance(u, R, HT, tau, eps, dt, dz, rho, nsteps, steady_tol, rho_out, cutoff=TRANSFER_CUTOFF):
    """Run up to ``nsteps`` steps; see the numba backend for the contract."""
    u = np.array(u, dtype=float)
    last_inc = math.inf
    log_dz = math.log(dz)
    for i in range(nsteps):
        dsq = grad_sq(u, dz)
        if dt * 2.0 * math.sqrt(float(dsq.max())) > dz:
            return u, i, STATUS_UNSTABLE, last_inc, rho
        rhs = R + eps * laplacian(u, dz) + dsq
        if tau != 0.0:
            rhs = rhs + tau * transfer_sum(u, HT, eps, cutoff)
        A = u + dt * rhs
        MA = A.max()
        log_s = log_dz + MA / eps + math.log(np.exp((A - MA) / eps).sum())
        rho_new = solve_mass(log_s, dt, eps, rho)
        if not (math.isfinite(rho_new) and rho_new > 0.0):
            return u, i, STATUS_NONFINITE, last_inc, rho
        u_new = A - dt * rho_new
        if not np.all(np.isfinite(u_new)):
            return u, i, STATUS_NONFINITE, last_inc, rho
        last_inc = float(np.abs(u_new - u).max()) / dt
        u, rho = u_new, rho_new
        rho_out[i] = rho
        if last_inc <= steady_tol:
            return u, i + 1, STATUS_STEADY, last_inc, rho
    return u, nsteps, STATUS_RUNNING, last_inc, rho
