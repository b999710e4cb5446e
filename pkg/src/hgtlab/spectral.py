"""Principal eigenvalue of ``-eps^2 d^2/dz^2 - R`` with Dirichlet boundaries.

With ``-eps^2 N'' - R N = -lam N`` the principal ``lam`` is the growth rate
of the transfer-free population; for ``R = 1 - g z^2`` on the whole line the
harmonic oscillator gives ``lam = 1 - eps sqrt(g)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError
from .kernels import growth

DEFAULT_DOMAIN = (-10.0, 10.0)
DEFAULT_POINTS = 4001
MIN_POINTS = 50
RQ_TOL = 1e-12
RESIDUAL_TOL = 1e-8
SHIFT_MARGIN = 1e-8
MAXITER = 5000
MONOTONE_SLACK = 1e-10


@dataclass(frozen=True)
class EigenResult:
    lam: float
    eigenvector: np.ndarray
    domain: tuple[float, float]
    n_points: int
    epsilon: float
    g: float
    residual: float
    iterations: int

    @property
    def nodes(self) -> np.ndarray:
        """All grid nodes, boundaries included (the eigenvector lives on the interior)."""
        a, b = self.domain
        return np.linspace(a, b, self.n_points)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "g": self.g,
            "domain": list(self.domain),
            "n_points": self.n_points,
            "residual": self.residual,
        }


def _operator(epsilon: float, g: float, a: float, b: float, n_points: int):
    """Diagonal and off-diagonal of ``-eps^2 D2 - R`` on the interior nodes."""
    h = (b - a) / (n_points - 1)
    z = np.linspace(a, b, n_points)[1:-1]
    c = epsilon * epsilon / (h * h)
    diag = 2.0 * c - growth(g, z)
    return diag, -c, h, z


def _apply(diag: np.ndarray, off: float, v: np.ndarray) -> np.ndarray:
    out = diag * v
    out[1:] += off * v[:-1]
    out[:-1] += off * v[1:]
    return out


def principal_eigen(
    epsilon: float,
    g: float,
    domain: tuple[float, float] = DEFAULT_DOMAIN,
    n_points: int = DEFAULT_POINTS,
) -> EigenResult:
    """Shifted inverse power iteration for the bottom of the spectrum.

    ``n_points`` counts both boundary nodes; the unknowns are the interior
    values. The shift sits just below ``-max R``, which lower-bounds the
    operator, so the iteration always converges to the principal pair.
    """
    a, b = (float(domain[0]), float(domain[1]))
    if not (epsilon > 0 and g > 0):
        raise DomainError("epsilon and g must be > 0")
    if n_points < MIN_POINTS:
        raise DomainError(f"n_points must be >= {MIN_POINTS}")
    half = 1.0 / math.sqrt(g)
    if not (a <= -half and b >= half):
        raise DomainError(f"domain [{a}, {b}] must contain the zero set of R, [-{half:.6g}, {half:.6g}]")

    diag, off, h, _ = _operator(epsilon, g, a, b, n_points)
    shift = -1.0 - SHIFT_MARGIN  # max R = 1 at z = 0, inside the domain
    m = diag.size
    ab = np.empty((3, m))
    ab[0, :] = off
    ab[1, :] = diag - shift
    ab[2, :] = off

    v = np.ones(m) / math.sqrt(h * m)
    rq_old = math.inf
    for it in range(1, MAXITER + 1):
        w = solve_banded((1, 1), ab, v)
        v = w / math.sqrt(h * float(w @ w))
        Lv = _apply(diag, off, v)
        rq = h * float(v @ Lv)
        if abs(rq - rq_old) <= RQ_TOL * max(1.0, abs(rq)):
            residual = math.sqrt(h * float(np.sum((Lv - rq * v) ** 2)))
            if residual <= RESIDUAL_TOL:
                break
        rq_old = rq
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {MAXITER} iterations", last_iterate=v)

    if v[m // 2] < 0:
        v = -v
    return EigenResult(
        lam=-rq,
        eigenvector=v,
        domain=(a, b),
        n_points=int(n_points),
        epsilon=float(epsilon),
        g=float(g),
        residual=residual,
        iterations=it,
    )


def domain_monotonicity_check(epsilon: float, g: float, domains, h: float = 5e-3) -> bool:
    """True when ``lam`` is nondecreasing along strictly nested domains.

    Every domain is discretised with the same spacing ``h`` so the
    comparison measures the domain effect, not a resolution change.
    """
    domains = [(float(a), float(b)) for a, b in domains]
    for (a0, b0), (a1, b1) in zip(domains, domains[1:]):
        if not (a1 <= a0 and b0 <= b1 and (a1, b1) != (a0, b0)):
            raise DomainError(f"domains are not strictly nested: [{a0}, {b0}] then [{a1}, {b1}]")
    lams = []
    for a, b in domains:
        n = int(round((b - a) / h)) + 1
        lams.append(principal_eigen(epsilon, g, (a, b), max(n, MIN_POINTS)).lam)
    return all(l1 >= l0 - MONOTONE_SLACK for l0, l1 in zip(lams, lams[1:]))
