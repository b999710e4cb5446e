"""Evolutionary stable strategies of the quadratic-growth transfer model.

With ``mu = tau / (2 g)`` the equilibria are sums of Dirac masses:

* ``mu <= mu1``: one point ``z0 = mu`` carrying mass ``1 - tau mu / 2``;
* ``mu1 < mu <= mu2``: two points a fixed distance ``d1`` apart (closed form);
* ``mu > mu2``: three points, obtained by Newton continuation from ``mu2``.

The kernel constants ``d1, C1, C2, mu1, mu2, z3`` depend on the transfer
kernel only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .errors import ConvergenceError, DomainError, KernelError
from .kernels import ModelParams, TransferKernel

D1_BRACKET_HI = 40.0
ROOT_XTOL = 1e-12
MU2_SEARCH_MAX = 20.0
MU2_XTOL = 1e-6
MU2_SCAN_STEP = 0.05
MU2_EXCLUSION = 0.1
Z_SCAN_STEP = 1e-3

TRI_START_OFFSET = 1e-3
TRI_SEED_WEIGHT = 1e-3
TRI_STEP = 0.05
NEWTON_TOL = 1e-10
NEWTON_MAXITER = 50


@dataclass(frozen=True)
class KernelConstants:
    kernel: str
    z_H: float
    d1: float
    C1: float
    C2: float
    mu1: float
    mu2: float = float("nan")
    z3: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "z_H": self.z_H,
            "d1": self.d1,
            "C1": self.C1,
            "C2": self.C2,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "z3": self.z3,
        }


def gap_function(kernel: TransferKernel, z):
    """``G(z) = 2 H(z) - z (1 + H'(z))``; its positive root is the dimorphic gap."""
    return 2.0 * kernel.H(z) - z * (1.0 + kernel.dH(z))


def _gap_derivative(kernel: TransferKernel, z):
    return kernel.dH(z) - 1.0 - z * kernel.d2H(z)


def _find_d1(kernel: TransferKernel) -> float:
    lo, hi = kernel.z_H, D1_BRACKET_HI
    f = lambda z: float(gap_function(kernel, z))
    flo, fhi = f(lo), f(hi)
    if not (flo > 0.0 > fhi):
        raise KernelError(f"G has no sign change on (z_H, {hi}]: G(z_H)={flo}, G({hi})={fhi}")
    d1 = bisect(f, lo, hi, xtol=ROOT_XTOL, maxiter=500)
    # Newton polish: G'(d1) < 0, simple root
    for _ in range(3):
        step = f(d1) / float(_gap_derivative(kernel, d1))
        if not math.isfinite(step) or abs(step) > 1e-8:
            break
        d1 -= step
    return d1


def _max_second_derivative(kernel: TransferKernel) -> float:
    z = np.linspace(-10.0, 10.0, 20001)
    v = kernel.d2H(z)
    i = int(np.argmax(v))
    lo, hi = z[max(i - 1, 0)], z[min(i + 1, z.size - 1)]
    res = minimize_scalar(lambda x: -float(kernel.d2H(x)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(v[i]), -float(res.fun))


def compute_constants(kernel: TransferKernel, with_mu2: bool = True) -> KernelConstants:
    """Kernel constants; ``with_mu2=False`` skips the (slower) third-point search."""
    d1 = _find_d1(kernel)
    C1 = 1.0 - float(kernel.dH(d1))
    C2 = 1.0 / _max_second_derivative(kernel)
    kc = KernelConstants(kernel.name, kernel.z_H, d1, C1, C2, d1 / C1)
    if with_mu2:
        mu2, z3 = find_mu2(kernel, kc)
        kc = replace(kc, mu2=mu2, z3=z3)
    return kc


# ---------------------------------------------------------------------------
# dimorphic fitness landscape


def dimorphic_points(mu: float, kc: KernelConstants) -> tuple[float, float]:
    z1 = mu * (1.0 - kc.C1 / 2.0) + kc.d1 / 2.0
    return z1, z1 - kc.d1


def dimorphic_fractions(mu: float, kc: KernelConstants) -> tuple[float, float]:
    r = kc.mu1 / mu
    return 0.5 * (1.0 + r), 0.5 * (1.0 - r)


def j2(z, mu: float, kernel: TransferKernel, kc: KernelConstants):
    """Scaled fitness ``F / g`` of the dimorphic candidate at ``mu``; independent of g."""
    z1, z2 = dimorphic_points(mu, kc)
    fa, fb = dimorphic_fractions(mu, kc)
    Hd1 = float(kernel.H(kc.d1))
    return z1 * z1 - np.square(z) - (mu - kc.mu1) * Hd1 + 2.0 * mu * (fa * kernel.H(z - z1) + fb * kernel.H(z - z2))


def _third_point_excursion(mu: float, kernel: TransferKernel, kc: KernelConstants) -> tuple[float, float]:
    """Max of ``J2`` away from the two dimorphic points, and where it sits."""
    z1, z2 = dimorphic_points(mu, kc)
    n = int(round((mu + 7.0) / Z_SCAN_STEP))
    z = np.linspace(-2.0, mu + 5.0, n + 1)
    J = j2(z, mu, kernel, kc)
    far = (np.abs(z - z1) > MU2_EXCLUSION) & (np.abs(z - z2) > MU2_EXCLUSION)
    J = np.where(far, J, -np.inf)
    i = int(np.argmax(J))
    lo, hi = z[max(i - 1, 0)], z[min(i + 1, n)]
    # golden-section refinement, staying outside the excluded neighbourhoods
    if far[max(i - 1, 0)] and far[min(i + 1, n)]:
        res = minimize_scalar(
            lambda x: -float(j2(x, mu, kernel, kc)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
        )
        if -res.fun > J[i]:
            return float(-res.fun), float(res.x)
    return float(J[i]), float(z[i])


def find_mu2(kernel: TransferKernel, kc: KernelConstants, mu_max: float = MU2_SEARCH_MAX) -> tuple[float, float]:
    """Smallest ``mu > mu1`` where the dimorphic fitness gains a third zero.

    Scans upward from ``mu1`` in steps of 0.05 until the off-support maximum of
    ``J2`` turns nonnegative, then bisects that bracket to 1e-6.
    Returns ``(mu2, z3)``.
    """
    lo = kc.mu1
    hi = None
    mu = lo
    while mu < mu_max:
        nxt = min(mu + MU2_SCAN_STEP, mu_max)
        if _third_point_excursion(nxt, kernel, kc)[0] >= 0.0:
            lo, hi = mu, nxt
            break
        mu = nxt
    if hi is None:
        raise KernelError(f"no third zero of the dimorphic fitness found for mu <= {mu_max}")
    while hi - lo > MU2_XTOL:
        mid = 0.5 * (lo + hi)
        if _third_point_excursion(mid, kernel, kc)[0] >= 0.0:
            hi = mid
        else:
            lo = mid
    mu2 = 0.5 * (lo + hi)
    return mu2, _third_point_excursion(hi, kernel, kc)[1]


def check_hypothesis_37(kernel: TransferKernel, kc: KernelConstants, mu: float, step: float = 1e-6) -> bool:
    """True when ``dJ2/dmu`` at the third point ``z3`` is positive at this ``mu``."""
    if not mu >= kc.mu2:
        raise DomainError(f"hypothesis check requires mu >= mu2 = {kc.mu2}, got {mu}")
    return j2_mu_derivative(kernel, kc, mu, step) > 0.0


def j2_mu_derivative(kernel: TransferKernel, kc: KernelConstants, mu: float, step: float = 1e-6) -> float:
    z3 = kc.z3
    return float((j2(z3, mu + step, kernel, kc) - j2(z3, mu - step, kernel, kc)) / (2.0 * step))


# ---------------------------------------------------------------------------
# discrete equilibria


@dataclass
class DiscreteESS:
    """A Dirac-sum equilibrium; points are stored in decreasing order."""

    points: tuple[float, ...]
    weights: tuple[float, ...]
    rho0: float
    valid: bool = True
    violated_condition: str | None = None
    regime: str = ""

    def __post_init__(self):
        if len(self.points) != len(self.weights) or not self.points:
            raise DomainError("points and weights must be non-empty and of equal length")
        order = sorted(range(len(self.points)), key=lambda i: -self.points[i])
        self.points = tuple(float(self.points[i]) for i in order)
        self.weights = tuple(float(self.weights[i]) for i in order)
        self.rho0 = float(self.rho0)

    @property
    def morphism(self) -> int:
        return len(self.points)

    @property
    def fractions(self) -> tuple[float, ...]:
        return tuple(w / self.rho0 for w in self.weights)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "points": list(self.points),
            "weights": list(self.weights),
            "rho0": self.rho0,
            "morphism": self.morphism,
            "valid": self.valid,
            "violated_condition": self.violated_condition,
        }


def monomorphic_ess(params: ModelParams, kc: KernelConstants) -> DiscreteESS:
    """Single trait ``z0 = mu`` with mass ``1 - tau mu / 2``.

    Valid iff ``mu <= mu1`` and ``tau < 2 / mu``; otherwise the candidate is
    returned with ``valid=False`` and the failed condition named.
    """
    mu, tau = params.mu, params.tau
    rho0 = 1.0 - tau * mu / 2.0
    reason = None
    if mu > kc.mu1:
        reason = "mu > mu1"
    elif mu > 0 and not tau < 2.0 / mu:
        reason = "tau >= 2/mu"
    return DiscreteESS((mu,), (rho0,), rho0, reason is None, reason, "monomorphic")


def dimorphic_threshold(mu: float, kernel: TransferKernel, kc: KernelConstants) -> float:
    """Largest transfer rate ``tau2`` keeping the dimorphic mass positive."""
    z1, _ = dimorphic_points(mu, kc)
    return 2.0 * mu / (z1 * z1 - (mu - kc.mu1) * float(kernel.H(kc.d1)))


def dimorphic_ess(params: ModelParams, kc: KernelConstants, kernel: TransferKernel) -> DiscreteESS:
    """Closed-form two-point equilibrium, valid for ``mu1 < mu <= mu2`` and ``tau < tau2``."""
    mu, g, tau = params.mu, params.g, params.tau
    if mu <= 0:
        return DiscreteESS((0.0, -kc.d1), (1.0, 0.0), 1.0, False, "mu <= mu1", "dimorphic")
    z1, z2 = dimorphic_points(mu, kc)
    fa, fb = dimorphic_fractions(mu, kc)
    rho0 = 1.0 - g * z1 * z1 + g * (mu - kc.mu1) * float(kernel.H(kc.d1))
    reason = None
    if mu <= kc.mu1:
        reason = "mu <= mu1"
    elif mu > kc.mu2:
        reason = "mu > mu2"
    elif not tau < dimorphic_threshold(mu, kernel, kc):
        reason = "tau >= tau2"
    return DiscreteESS((z1, z2), (fa * rho0, fb * rho0), rho0, reason is None, reason, "dimorphic")


# ---------------------------------------------------------------------------
# trimorphic system


@dataclass
class TrimorphicSolution:
    """Root of the three-point stationarity system at one ``mu``."""

    mu: float
    g: float
    points: np.ndarray
    fractions: np.ndarray
    rho0: float
    residual: float
    iterations: int

    def to_ess(self, valid: bool = True, reason: str | None = None) -> DiscreteESS:
        return DiscreteESS(
            tuple(self.points), tuple(self.fractions * self.rho0), self.rho0, valid, reason, "trimorphic"
        )


def _system45(x: np.ndarray, mu: float, g: float, kernel: TransferKernel):
    z = x[:3]
    w = np.array([x[3], x[4], 1.0 - x[3] - x[4]])
    rho0 = x[5]
    D = z[:, None] - z[None, :]
    HD, dHD, d2HD = kernel.H(D), kernel.dH(D), kernel.d2H(D)
    psi = HD @ w
    dpsi = dHD @ w
    r = np.concatenate([-z * z + 2.0 * mu * psi - (rho0 - 1.0) / g, -z + mu * dpsi])

    J = np.zeros((6, 6))
    # d psi(z_i) / d z_k = delta_ik dpsi(z_i) - w_k H'(z_i - z_k)
    dpsi_dz = np.diag(dpsi) - dHD * w[None, :]
    ddpsi_dz = np.diag(d2HD @ w) - d2HD * w[None, :]
    J[:3, :3] = -2.0 * np.diag(z) + 2.0 * mu * dpsi_dz
    J[3:, :3] = -np.eye(3) + mu * ddpsi_dz
    for m in range(2):
        J[:3, 3 + m] = 2.0 * mu * (HD[:, m] - HD[:, 2])
        J[3:, 3 + m] = mu * (dHD[:, m] - dHD[:, 2])
    J[:3, 5] = -1.0 / g
    return r, J


def solve_system45(
    mu: float, g: float, kernel: TransferKernel, seed: np.ndarray, tol: float = NEWTON_TOL
) -> TrimorphicSolution:
    """Newton's method on ``(z1, z2, z3, w1, w2, rho0)`` with ``w3 = 1 - w1 - w2``.

    Equations, for i = 1, 2, 3 and ``psi(z) = sum_k w_k H(z - z_k)``::

        -z_i^2 + 2 mu psi(z_i) - (rho0 - 1) / g = 0
        -z_i + mu psi'(z_i) = 0
    """
    x = np.array(seed, dtype=float)
    if x.shape != (6,):
        raise DomainError("seed must be (z1, z2, z3, w1, w2, rho0)")
    res = np.inf
    for it in range(NEWTON_MAXITER + 1):
        r, J = _system45(x, mu, g, kernel)
        res = float(np.max(np.abs(r)))
        if not np.all(np.isfinite(r)):
            break
        if res <= tol:
            # one more step for full precision, kept only if it helps
            try:
                x2 = x - np.linalg.solve(J, r)
                r2, _ = _system45(x2, mu, g, kernel)
                if np.max(np.abs(r2)) < res:
                    x, res = x2, float(np.max(np.abs(r2)))
            except np.linalg.LinAlgError:
                pass
            w = np.array([x[3], x[4], 1.0 - x[3] - x[4]])
            return TrimorphicSolution(mu, g, x[:3].copy(), w, float(x[5]), res, it)
        try:
            x = x - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
    raise ConvergenceError(f"Newton diverged at mu={mu} (max residual {res:.3e})", last_iterate=x)


def _start_seed(mu: float, g: float, kernel: TransferKernel, kc: KernelConstants) -> np.ndarray:
    z1, z2 = dimorphic_points(mu, kc)
    fa, fb = dimorphic_fractions(mu, kc)
    rho0 = 1.0 - g * z1 * z1 + g * (mu - kc.mu1) * float(kernel.H(kc.d1))
    return np.array([z1, z2, kc.z3, fa, fb - TRI_SEED_WEIGHT, rho0])


def _seed_from(sol: TrimorphicSolution) -> np.ndarray:
    return np.array([*sol.points, sol.fractions[0], sol.fractions[1], sol.rho0])


def trimorphic_branch(
    mu_values, tau: float, kernel: TransferKernel, kc: KernelConstants, step: float = TRI_STEP
) -> dict[float, TrimorphicSolution]:
    """Follow the three-point branch from ``mu2 + 1e-3`` through the requested ``mu`` values.

    ``g = tau / (2 mu)`` along the branch. Each converged point seeds the next
    one; targets below the starting point are solved from the start solution.
    """
    targets = sorted(set(float(m) for m in mu_values))
    start = kc.mu2 + TRI_START_OFFSET
    g_of = lambda m: tau / (2.0 * m)
    cur = solve_system45(start, g_of(start), kernel, _start_seed(start, g_of(start), kernel, kc))
    first = cur
    out: dict[float, TrimorphicSolution] = {}
    for t in targets:
        if t <= start:
            out[t] = solve_system45(t, g_of(t), kernel, _seed_from(first))
            continue
        while cur.mu < t:
            m = min(cur.mu + step, t)
            cur = solve_system45(m, g_of(m), kernel, _seed_from(cur))
        out[t] = cur
    return out


def trimorphic_ess(
    params: ModelParams,
    kc: KernelConstants,
    kernel: TransferKernel,
    seed: DiscreteESS | None = None,
) -> DiscreteESS:
    """Three-point equilibrium for ``mu > mu2``.

    Without a seed the solution is reached by continuation in ``mu``. Raises
    :class:`ConvergenceError` on divergence or a negative weight.
    """
    mu, g = params.mu, params.g
    if not mu > kc.mu2:
        raise DomainError(f"trimorphic solver requires mu > mu2 = {kc.mu2}, got {mu}")
    if seed is not None:
        if seed.morphism != 3:
            raise DomainError("seed must have three support points")
        f = seed.fractions
        x0 = np.array([*seed.points, f[0], f[1], seed.rho0])
        sol = solve_system45(mu, g, kernel, x0)
    else:
        sol = trimorphic_branch([mu], params.tau, kernel, kc)[mu]
    if np.any(sol.fractions < 0):
        raise ConvergenceError(f"negative weight in trimorphic solution at mu={mu}", last_iterate=sol)
    if not sol.rho0 > 0:
        return sol.to_ess(False, "rho0 <= 0")
    return sol.to_ess()


# ---------------------------------------------------------------------------
# fitness and verification


@dataclass
class FitnessProfile:
    grid: np.ndarray
    values: np.ndarray
    transfer: np.ndarray


def _transfer_potential(ess: DiscreteESS, params: ModelParams, kernel: TransferKernel, z, deriv: int = 0):
    fns = (kernel.H, kernel.dH, kernel.d2H)
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for zi, fi in zip(ess.points, ess.fractions):
        out = out + fi * fns[deriv](z - zi)
    return params.tau * out


def fitness_values(ess: DiscreteESS, params: ModelParams, kernel: TransferKernel, z):
    z = np.asarray(z, dtype=float)
    return 1.0 - params.g * z * z - ess.rho0 + _transfer_potential(ess, params, kernel, z)


def fitness_derivative(ess: DiscreteESS, params: ModelParams, kernel: TransferKernel, z):
    z = np.asarray(z, dtype=float)
    return -2.0 * params.g * z + _transfer_potential(ess, params, kernel, z, deriv=1)


def fitness(ess: DiscreteESS, params: ModelParams, kernel: TransferKernel, grid) -> FitnessProfile:
    """Sample ``F(z) = 1 - g z^2 - rho0 + tau sum_i (a_i/rho0) H(z - z_i)``."""
    z = np.asarray(grid, dtype=float)
    if z.size == 0:
        raise DomainError("fitness grid is empty")
    if not ess.rho0 > 0:
        raise DomainError("fitness needs rho0 > 0")
    phi = _transfer_potential(ess, params, kernel, z)
    return FitnessProfile(z, 1.0 - params.g * z * z - ess.rho0 + phi, phi)


@dataclass
class EssReport:
    valid: bool
    max_fitness_excursion: float
    argmax: float
    support_values: list[float]
    support_slopes: list[float]
    bounds_ok: bool
    weights_ok: bool
    off_support_maxima: list[tuple[float, float]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "max_fitness_excursion": self.max_fitness_excursion,
            "argmax": self.argmax,
            "support_values": self.support_values,
            "support_slopes": self.support_slopes,
            "bounds_ok": self.bounds_ok,
            "weights_ok": self.weights_ok,
            "off_support_maxima": [list(p) for p in self.off_support_maxima],
            "failures": list(self.failures),
        }


def support_bound(mu: float) -> float:
    """Upper bound ``min(mu, 2 sqrt(mu))`` on any equilibrium trait."""
    return min(mu, 2.0 * math.sqrt(mu))


def verify_ess(
    ess: DiscreteESS,
    params: ModelParams,
    kernel: TransferKernel,
    step: float = 1e-3,
    tol: float = 1e-7,
    span: tuple[float, float] | None = None,
) -> EssReport:
    """Check ``F <= 0`` on a grid, ``F = F' = 0`` on the support and the trait bounds."""
    mu = params.mu
    lo, hi = span if span is not None else (-2.0, mu + 5.0)
    n = int(round((hi - lo) / step))
    z = np.linspace(lo, hi, n + 1)
    failures: list[str] = []
    weights_ok = ess.rho0 > 0 and all(w >= 0 for w in ess.weights)
    if not weights_ok:
        failures.append("nonpositive mass or negative weight")
        return EssReport(False, float("nan"), float("nan"), [], [], False, False, [], failures)

    F = fitness_values(ess, params, kernel, z)
    i = int(np.argmax(F))
    fz = [float(v) for v in fitness_values(ess, params, kernel, np.array(ess.points))]
    dfz = [float(v) for v in fitness_derivative(ess, params, kernel, np.array(ess.points))]
    bound = support_bound(mu)
    bounds_ok = all(-1e-12 <= p <= bound + 1e-12 for p in ess.points)

    if F[i] > tol:
        failures.append(f"fitness positive off support: F({z[i]:.6g}) = {F[i]:.3e}")
    if any(abs(v) > tol for v in fz):
        failures.append("fitness nonzero on support")
    if any(abs(v) > 10 * tol for v in dfz):
        failures.append("fitness slope nonzero on support")
    if not bounds_ok:
        failures.append("support outside [0, min(mu, 2 sqrt(mu))]")

    # local maxima of F away from the support, highest first
    interior = (F[1:-1] >= F[:-2]) & (F[1:-1] >= F[2:])
    idx = np.nonzero(interior)[0] + 1
    pts = np.array(ess.points)
    far = [j for j in idx if np.min(np.abs(z[j] - pts)) > 5 * step]
    off = sorted(((float(z[j]), float(F[j])) for j in far), key=lambda p: -p[1])[:5]

    return EssReport(
        not failures, float(F[i]), float(z[i]), fz, dfz, bounds_ok, weights_ok, off, failures
    )


# ---------------------------------------------------------------------------
# regime sweep


@dataclass
class SweepRow:
    mu: float
    g: float
    regime: str
    ess: DiscreteESS | None
    verified: bool


def classify(params: ModelParams, kc: KernelConstants, kernel: TransferKernel, tri: TrimorphicSolution | None = None):
    """Pick the equilibrium that applies at ``params``; returns ``(regime, ess)``."""
    mu = params.mu
    if mu <= kc.mu1:
        ess = monomorphic_ess(params, kc)
        return ("mono" if ess.valid else "none"), ess
    if mu <= kc.mu2:
        ess = dimorphic_ess(params, kc, kernel)
        return ("di" if ess.valid else "none"), ess
    try:
        if tri is None:
            ess = trimorphic_ess(params, kc, kernel)
        else:
            if np.any(tri.fractions < 0):
                raise ConvergenceError("negative weight", tri)
            ess = tri.to_ess(tri.rho0 > 0, None if tri.rho0 > 0 else "rho0 <= 0")
    except ConvergenceError:
        return "none", None
    return ("tri" if ess.valid else "none"), ess


def sweep(mu_values, tau: float, kernel: TransferKernel, kc: KernelConstants) -> list[SweepRow]:
    """Equilibria along ``mu`` at fixed ``tau`` (so ``g = tau / (2 mu)``), ascending in ``mu``."""
    mus = sorted(set(float(m) for m in mu_values))
    if any(m <= 0 for m in mus):
        raise DomainError("sweep values of mu must be > 0")
    tri_mus = [m for m in mus if m > kc.mu2]
    branch: dict[float, TrimorphicSolution] = {}
    if tri_mus:
        try:
            branch = trimorphic_branch(tri_mus, tau, kernel, kc)
        except ConvergenceError:
            branch = {}
    rows = []
    for mu in mus:
        params = ModelParams.from_mu(mu, tau)
        if mu > kc.mu2 and mu not in branch:
            rows.append(SweepRow(mu, params.g, "none", None, False))
            continue
        regime, ess = classify(params, kc, kernel, branch.get(mu))
        verified = False
        if ess is not None and ess.valid:
            verified = verify_ess(ess, params, kernel).valid
            if not verified:
                regime = "none"
        rows.append(SweepRow(mu, params.g, regime, ess, verified))
    return rows
