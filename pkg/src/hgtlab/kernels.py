"""Transfer kernels, the quadratic growth rate and parameter rescaling.

A transfer kernel is an odd sigmoid ``H`` with ``H(0) = 0`` and ``H'(0) = 1``
whose third derivative changes sign exactly once on ``(0, inf)``, at ``z_H``.
Two kernels ship with the package::

    tanh    H(z) = tanh(z)
    arctan  H(z) = (2/pi) * arctan(pi z / 2)

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .errors import ConfigurationError, DomainError, KernelError

ArrayFn = Callable[[np.ndarray], np.ndarray]

Z_H_BRACKET = (1e-6, 10.0)
Z_H_XTOL = 1e-12


@dataclass(frozen=True)
class TransferKernel:
    name: str
    H: ArrayFn
    dH: ArrayFn
    d2H: ArrayFn
    d3H: ArrayFn
    z_H: float = field(default=float("nan"))

    @classmethod
    def from_functions(cls, name: str, H: ArrayFn, dH: ArrayFn, d2H: ArrayFn, d3H: ArrayFn) -> "TransferKernel":
        """Build a kernel and locate the sign change of its third derivative."""
        return cls(name, H, dH, d2H, d3H, _locate_z_h(d3H))


def _locate_z_h(d3H: ArrayFn) -> float:
    lo, hi = Z_H_BRACKET
    f = lambda z: float(d3H(np.float64(z)))
    if not (f(lo) < 0.0 < f(hi)):
        raise KernelError("third derivative does not change sign from - to + on (1e-6, 10]")
    return bisect(f, lo, hi, xtol=Z_H_XTOL, maxiter=200)


def _sech2(z):
    c = np.cosh(z)
    return 1.0 / (c * c)


def _tanh_kernel() -> TransferKernel:
    def d2H(z):
        return -2.0 * np.tanh(z) * _sech2(z)

    def d3H(z):
        t = np.tanh(z)
        return _sech2(z) * (6.0 * t * t - 2.0)

    return TransferKernel.from_functions("tanh", np.tanh, _sech2, d2H, d3H)


_C = math.pi / 2.0


def _arctan_kernel() -> TransferKernel:
    # slope pi/2 inside arctan restores H'(0) = 1
    def H(z):
        return np.arctan(_C * z) / _C

    def dH(z):
        return 1.0 / (1.0 + (_C * z) ** 2)

    def d2H(z):
        q = 1.0 + (_C * z) ** 2
        return -2.0 * _C**2 * z / (q * q)

    def d3H(z):
        q = 1.0 + (_C * z) ** 2
        return 2.0 * _C**2 * (3.0 * (_C * z) ** 2 - 1.0) / (q * q * q)

    return TransferKernel.from_functions("arctan", H, dH, d2H, d3H)


_FACTORIES = {"tanh": _tanh_kernel, "arctan": _arctan_kernel}
KERNEL_NAMES = tuple(_FACTORIES)


def make_kernel(name: str) -> TransferKernel:
    """Return the shipped kernel called ``name`` ('tanh' or 'arctan').

    The suffix ``-kernel`` is accepted, so ``'tanh-kernel'`` also works.
    """
    key = name.strip().lower()
    if key.endswith("-kernel"):
        key = key[: -len("-kernel")]
    if key not in _FACTORIES:
        raise ConfigurationError(
            f"unknown kernel {name!r}; supported kernels: {', '.join(KERNEL_NAMES)}", field="kernel"
        )
    return _FACTORIES[key]()


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class H1Report:
    kernel: str
    clauses: dict[str, bool]
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "passed": self.passed, "clauses": dict(self.clauses), "checks": dict(self.checks)}


def default_grid(step: float = 1e-3, half_width: float = 10.0) -> np.ndarray:
    n = int(round(2 * half_width / step))
    return np.linspace(-half_width, half_width, n + 1)


def validate_h1(kernel: TransferKernel, grid: np.ndarray | None = None) -> H1Report:
    """Check the three structural clauses on sampled points.

    Clause 1: odd, increasing, values in (-1, 1).
    Clause 2: H(0) = 0, H'(0) = 1, H'' < 0 on z > 0.
    Clause 3: H''' <= 0 for |z| <= z_H and H''' > 0 for |z| > z_H.
    """
    z = default_grid() if grid is None else np.asarray(grid, dtype=float)
    H, dH, d2H, d3H = (np.asarray(f(z), dtype=float) for f in (kernel.H, kernel.dH, kernel.d2H, kernel.d3H))
    Hneg = np.asarray(kernel.H(-z), dtype=float)
    pos = z > 0
    a = np.abs(z)
    z_H = kernel.z_H

    checks = {
        "odd": bool(np.all(np.abs(H + Hneg) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(H)))),
        "increasing": bool(np.all(dH > 0)),
        "bounded": bool(np.all(np.abs(H) < 1.0)),
        "zero_at_origin": float(kernel.H(np.float64(0.0))) == 0.0,
        "unit_slope_at_origin": abs(float(kernel.dH(np.float64(0.0))) - 1.0) <= 1e-15,
        "concave_on_positive": bool(np.all(d2H[pos] < 0)),
    }
    if math.isfinite(z_H) and z_H > 0:
        # points within 1e-9 of z_H sit on the sign change and are not informative
        inner = (a <= z_H) & (np.abs(a - z_H) > 1e-9)
        outer = (a > z_H) & (np.abs(a - z_H) > 1e-9)
        checks["third_derivative_nonpositive_inside"] = bool(np.all(d3H[inner] <= 0))
        checks["third_derivative_positive_outside"] = bool(np.all(d3H[outer] > 0))
    else:
        checks["third_derivative_nonpositive_inside"] = False
        checks["third_derivative_positive_outside"] = False
    checks["derivatives_consistent"] = derivative_consistency(kernel)

    clauses = {
        "H1.1_odd_monotone_bounded": checks["odd"] and checks["increasing"] and checks["bounded"],
        "H1.2_normalized_concave": checks["zero_at_origin"]
        and checks["unit_slope_at_origin"]
        and checks["concave_on_positive"],
        "H1.3_third_derivative_sign": checks["third_derivative_nonpositive_inside"]
        and checks["third_derivative_positive_outside"],
    }
    return H1Report(kernel.name, clauses, checks)


def derivative_consistency(kernel: TransferKernel, steps=(1e-2, 1e-3), half_width: float = 10.0) -> bool:
    """Centered differences of each coded derivative reproduce the next one at O(h^2).

    The bound is ``5 h^2 max|f'''|`` for a function ``f``; the maxima of the
    fourth and fifth derivatives are themselves estimated by differencing ``d3H``.
    """
    z = np.linspace(-half_width, half_width, 4001)
    fns = [kernel.H, kernel.dH, kernel.d2H, kernel.d3H]
    hc = 1e-3
    d3 = np.abs(kernel.d3H(z))
    d4 = (kernel.d3H(z + hc) - kernel.d3H(z - hc)) / (2 * hc)
    d5 = (kernel.d3H(z + hc) - 2 * kernel.d3H(z) + kernel.d3H(z - hc)) / hc**2
    third_of = [d3.max(), np.abs(d4).max(), np.abs(d5).max()]
    for h in steps:
        for k in range(3):
            f, df = fns[k], fns[k + 1]
            fd = (f(z + h) - f(z - h)) / (2 * h)
            # rounding floor for the difference quotient
            bound = 5 * h * h * third_of[k] + 1e3 * np.finfo(float).eps / h
            if np.max(np.abs(df(z) - fd)) > bound:
                return False
    return True


# ---------------------------------------------------------------------------
# growth and parameters


def growth(g: float, z):
    """Quadratic growth rate ``1 - g z^2`` (maximum 1 at z = 0)."""
    return 1.0 - g * np.square(z)


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters.

    ``tau = 0`` is allowed (pure selection-mutation); ``epsilon`` is only
    needed by the PDE and spectral modules.
    """

    tau: float
    g: float
    epsilon: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise DomainError(f"tau must be finite and >= 0, got {self.tau}")
        if not (math.isfinite(self.g) and self.g > 0):
            raise DomainError(f"g must be finite and > 0, got {self.g}")
        if self.epsilon is not None and not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise DomainError(f"epsilon must be finite and > 0, got {self.epsilon}")

    @property
    def mu(self) -> float:
        return self.tau / (2.0 * self.g)

    @classmethod
    def from_mu(cls, mu: float, tau: float, epsilon: float | None = None) -> "ModelParams":
        """Parameters with the given transfer/selection ratio at fixed tau."""
        if mu <= 0:
            raise DomainError("mu must be > 0 to recover g from tau")
        return cls(tau=tau, g=tau / (2.0 * mu), epsilon=epsilon)


@dataclass(frozen=True)
class PhysicalParams:
    sigma: float
    K: float
    r: float
    kappa: float
    tau_phys: float
    g_phys: float

    def __post_init__(self):
        for name in ("sigma", "K", "r", "kappa", "tau_phys", "g_phys"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v}")


def adimensionalize(p: PhysicalParams) -> ModelParams:
    """Rescale traits by K and time by the maximal growth rate r.

    The competition intensity only rescales the density and does not enter
    the dimensionless parameters.
    """
    if not isinstance(p, PhysicalParams):
        raise DomainError("expected PhysicalParams")
    tau = p.tau_phys / p.r
    g = p.g_phys / (p.r * p.K**2)
    eps = math.sqrt(p.sigma * p.K**2 / p.r)
    return ModelParams(tau=tau, g=g, epsilon=eps)
