"""Asymptotic-preserving finite-difference scheme in Hopf-Cole variables.

The unknown is ``u = eps * ln n`` on a uniform grid. One time step::

    A_j     = u_j + dt * (R_j + T_j + eps * Lap(u)_j + Dsq(u)_j)
    rho_new = root of  y * exp(y dt / eps) = dz * sum_j exp(A_j / eps)
    u_j    <- A_j - dt * rho_new

``T_j`` is the transfer convolution against the normalised density,
``Lap`` the three-point Laplacian with cubic ghost extrapolation and ``Dsq``
the monotone upwind squared gradient. Everything but the mass is explicit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .. import _accel
from ..errors import ConfigurationError, DomainError, NumericalError
from ..kernels import ModelParams, TransferKernel, growth
from . import _numpy_backend
from .mass import FORM_AUTO, FORM_G, FORM_H, solve_mass
from .operators import TRANSFER_CUTOFF, grad_sq, laplacian, normalized_density, transfer_matrix, transfer_sum

logger = logging.getLogger(__name__)

STATUS_RUNNING, STATUS_STEADY, STATUS_NONFINITE, STATUS_UNSTABLE = 0, 1, 2, 3
MIN_NODES = 8
CHUNK = 20000


def _backend(name: str | None):
    name = name or _accel.default_backend()
    if name == "numba":
        from . import _numba_backend

        return name, _numba_backend
    if name == "numpy":
        return name, _numpy_backend
    raise ConfigurationError(f"unknown backend {name!r}; use 'numba' or 'numpy'", field="backend")


@dataclass(frozen=True)
class Grid1D:
    z_min: float
    z_max: float
    dz: float

    def __post_init__(self):
        if not (self.dz > 0 and self.z_max > self.z_min):
            raise DomainError("grid needs dz > 0 and z_max > z_min")
        cells = (self.z_max - self.z_min) / self.dz
        if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
            raise DomainError(f"(z_max - z_min)/dz = {cells} is not an integer")
        if round(cells) + 1 < MIN_NODES:
            raise DomainError(f"grid needs at least {MIN_NODES} nodes")

    @property
    def n_z(self) -> int:
        return int(round((self.z_max - self.z_min) / self.dz)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.n_z)


@dataclass
class SimConfig:
    params: ModelParams
    kernel: TransferKernel
    grid: Grid1D
    dt: float = 1e-4
    t_max: float = 1000.0
    z_init: float = 0.0
    A: float = 1.0
    steady_tol: float = 1e-7
    band: float | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.params.epsilon is None:
            raise ConfigurationError("the PDE needs epsilon > 0", field="epsilon")
        if not self.dt > 0:
            raise ConfigurationError("dt must be > 0", field="dt")
        if not self.t_max > 0:
            raise ConfigurationError("t_max must be > 0", field="t_max")
        if not self.A > 0:
            raise ConfigurationError("A must be > 0", field="A")
        if not self.steady_tol > 0:
            raise ConfigurationError("steady_tol must be > 0", field="steady_tol")
        if not (self.grid.z_min <= self.z_init <= self.grid.z_max):
            raise ConfigurationError("z_init must lie inside [z_min, z_max]", field="z_init")

    @property
    def epsilon(self) -> float:
        return float(self.params.epsilon)

    @property
    def support_band(self) -> float:
        if self.band is not None:
            return self.band
        eps = self.epsilon
        return 10.0 * eps * abs(math.log(eps))

    @property
    def max_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class PdeState:
    u: np.ndarray
    rho: float
    t_index: int = 0
    rho_history: list[float] = field(default_factory=list)


class _Operators:
    """Per-config arrays reused by every step."""

    def __init__(self, config: SimConfig):
        self.z = config.grid.nodes
        self.R = growth(config.params.g, self.z)
        self.HT = transfer_matrix(self.z, config.kernel.H)


def mass_log(u: np.ndarray, eps: float, dz: float) -> float:
    """``ln(dz * sum exp(u/eps))`` via max-shifted exponentials."""
    return math.log(dz) + float(logsumexp(np.asarray(u) / eps))


def init_state(config: SimConfig) -> PdeState:
    """Concave parabola ``u = -A (z - z_init)^2`` and its mass."""
    z = config.grid.nodes
    u = -config.A * (z - config.z_init) ** 2
    rho = math.exp(mass_log(u, config.epsilon, config.grid.dz))
    return PdeState(u=u, rho=rho, t_index=0, rho_history=[])


def transfer_term(state: PdeState, config: SimConfig, cutoff: float = 0.0) -> np.ndarray:
    """``T_j = tau * sum_k H(z_j - z_k) n_k / rho * dz`` by direct dense summation."""
    HT = transfer_matrix(config.grid.nodes, config.kernel.H)
    return config.params.tau * transfer_sum(state.u, HT, config.epsilon, cutoff)


def solve_rho(A: np.ndarray, dt: float, epsilon: float, dz: float, rho_prev: float = 1.0, form: str = "auto") -> float:
    """Implicit mass: positive root of ``y exp(y dt/eps) = dz sum exp(A_j/eps)``."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError("non-finite intermediate values in mass equation")
    return solve_mass_equation(mass_log(A, epsilon, dz), dt, epsilon, rho_prev, form)


def solve_mass_equation(log_s: float, dt: float, epsilon: float, rho_prev: float = 1.0, form: str = "auto") -> float:
    """Root of ``y exp(y dt/eps) = exp(log_s)``; ``form`` is 'auto', 'h' or 'g'."""
    codes = {"auto": FORM_AUTO, "h": FORM_H, "g": FORM_G}
    if form not in codes:
        raise ConfigurationError(f"unknown mass form {form!r}", field="form")
    if not math.isfinite(log_s):
        raise NumericalError(f"mass equation right-hand side is not positive and finite (ln S = {log_s})")
    y = solve_mass(float(log_s), float(dt), float(epsilon), float(rho_prev), codes[form])
    if not (math.isfinite(y) and y > 0):
        raise NumericalError("mass equation has no positive finite root")
    return y


def intermediate(state: PdeState, config: SimConfig, ops: _Operators | None = None) -> np.ndarray:
    """The explicit part ``A`` of one step (dense transfer sum)."""
    ops = ops or _Operators(config)
    eps, dz = config.epsilon, config.grid.dz
    u = state.u
    rhs = ops.R + eps * laplacian(u, dz) + grad_sq(u, dz)
    if config.params.tau != 0.0:
        rhs = rhs + config.params.tau * transfer_sum(u, ops.HT, eps)
    return u + config.dt * rhs


def _raise_for(status: int, state: PdeState, config: SimConfig, last_inc: float):
    if status == STATUS_UNSTABLE:
        raise NumericalError(
            f"gradient stability limit violated at step {state.t_index}: dt must satisfy "
            f"dt <= dz / (2 max|Du|); reduce dt below {config.dt} or refine the initial slope",
            snapshot={"t_index": state.t_index, "rho": state.rho, "u": state.u.tolist()},
        )
    if status == STATUS_NONFINITE:
        raise NumericalError(
            f"non-finite mass or profile at step {state.t_index}",
            snapshot={"t_index": state.t_index, "rho": state.rho, "last_increment": last_inc},
        )


def step(state: PdeState, config: SimConfig, ops: _Operators | None = None) -> PdeState:
    """One time step; returns a new state with the mass appended to the history."""
    ops = ops or _Operators(config)
    _, backend = _backend(config.backend)
    out = np.empty(1)
    u, done, status, last_inc, rho = backend.advance(
        state.u, ops.R, ops.HT, config.params.tau, config.epsilon, config.dt, config.grid.dz,
        state.rho, 1, 0.0, out, TRANSFER_CUTOFF,
    )
    if done != 1:
        _raise_for(status, state, config, last_inc)
    return PdeState(u=u, rho=rho, t_index=state.t_index + 1, rho_history=state.rho_history + [rho])


def step_arrays(u, z, tau: float, g: float, eps: float, dt: float, dz: float, H, rho_prev: float = 1.0):
    """Single step on bare arrays (any grid with >= 3 nodes); returns ``(u_new, rho_new, A)``."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    R = growth(g, z)
    rhs = R + eps * laplacian(u, dz) + grad_sq(u, dz)
    if tau != 0.0:
        rhs = rhs + tau * transfer_sum(u, transfer_matrix(z, H), eps)
    A = u + dt * rhs
    rho = solve_rho(A, dt, eps, dz, rho_prev)
    return A - dt * rho, rho, A


# ---------------------------------------------------------------------------
# full runs


@dataclass
class SimReport:
    z: np.ndarray
    u: np.ndarray
    n_rescaled: np.ndarray
    rho_history: np.ndarray
    support: list[float]
    steady: bool
    steps: int
    rho: float
    last_increment: float
    backend: str
    diagnostics: dict
    dt: float

    @property
    def t_final(self) -> float:
        return self.steps * self.dt

    def to_dict(self) -> dict:
        return {
            "steady": self.steady,
            "steps": self.steps,
            "rho": self.rho,
            "support": list(self.support),
            "last_increment": self.last_increment,
            "backend": self.backend,
            "threads": 1,
            "t_final": self.t_final,
            "diagnostics": dict(self.diagnostics),
        }


def extract_support(z: np.ndarray, u: np.ndarray, band: float) -> list[float]:
    """Local maxima of ``u`` lying within ``band`` of its global maximum."""
    top = u.max() - band
    n = u.size
    out = []
    j = 0
    while j < n:
        if u[j] >= top:
            # plateau of equal values counts once, at its first node
            k = j
            while k + 1 < n and u[k + 1] == u[j]:
                k += 1
            left_ok = j == 0 or u[j - 1] < u[j]
            right_ok = k == n - 1 or u[k + 1] < u[k]
            if left_ok and right_ok:
                out.append(float(z[j]))
            j = k + 1
        else:
            j += 1
    return sorted(out)


def steady_diagnostics(u: np.ndarray, rho: float, config: SimConfig) -> dict:
    """Discrete versions of ``max u = 0``, ``int R n = rho^2`` and the mass bounds."""
    eps, dz = config.epsilon, config.grid.dz
    z = config.grid.nodes
    R = growth(config.params.g, z)
    M = float(u.max())
    w = np.exp((u - M) / eps)
    log_scale = M / eps + math.log(dz)
    int_Rn = float(np.dot(R, w)) * math.exp(log_scale)
    tau = config.params.tau
    p = w / w.sum()
    HT = transfer_matrix(z, config.kernel.H)
    antisym = float(p @ HT @ p)
    return {
        "max_u": M,
        "max_u_bound": 20.0 * eps * abs(math.log(eps)),
        "max_u_ok": abs(M) <= 20.0 * eps * abs(math.log(eps)),
        "mass_identity_residual": abs(int_Rn - rho * rho) / (rho * rho),
        "mass_identity_ok": abs(int_Rn - rho * rho) <= 1e-2 * rho * rho,
        "rho_bounds": [1.0 - tau - 0.05, 1.0 + tau + 0.05],
        "rho_bounds_ok": 1.0 - tau - 0.05 <= rho <= 1.0 + tau + 0.05,
        "transfer_antisymmetry": antisym,
    }


def run(config: SimConfig, state: PdeState | None = None, chunk: int = CHUNK) -> SimReport:
    """Step until steady (max |du/dt| <= steady_tol) or until ``t_max``."""
    name, backend = _backend(config.backend)
    ops = _Operators(config)
    state = state or init_state(config)
    u, rho = state.u, state.rho
    history = [np.asarray(state.rho_history, dtype=float)]
    taken = state.t_index
    total = config.max_steps
    status, last_inc = STATUS_RUNNING, math.inf
    while taken < total:
        n = min(chunk, total - taken)
        buf = np.empty(n)
        u_new, done, status, inc, rho_new = backend.advance(
            u, ops.R, ops.HT, config.params.tau, config.epsilon, config.dt, config.grid.dz,
            rho, n, config.steady_tol, buf, TRANSFER_CUTOFF,
        )
        history.append(buf[:done])
        taken += done
        if done:
            u, rho, last_inc = u_new, rho_new, inc
        if status in (STATUS_UNSTABLE, STATUS_NONFINITE):
            _raise_for(status, PdeState(u, rho, taken), config, last_inc)
        logger.debug("step %d rho=%.6g increment=%.3e", taken, rho, last_inc)
        if status == STATUS_STEADY:
            break

    z = ops.z
    eps = config.epsilon
    return SimReport(
        z=z,
        u=u,
        n_rescaled=np.exp((u - u.max()) / eps),
        rho_history=np.concatenate(history),
        support=extract_support(z, u, config.support_band),
        steady=status == STATUS_STEADY,
        steps=taken,
        rho=rho,
        last_increment=last_inc,
        backend=name,
        diagnostics=steady_diagnostics(u, rho, config),
        dt=config.dt,
    )
