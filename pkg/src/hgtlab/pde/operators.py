"""Vectorised finite-difference operators on a uniform 1-D grid.

These are the reference (numpy) forms of the scheme's building blocks; the
numba backend re-implements the same arithmetic node by node.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

# normalised transfer weights below this are dropped from the convolution;
# each dropped term changes T_j by < 1e-18
TRANSFER_CUTOFF = 1e-18


def ghost_values(u: np.ndarray) -> tuple[float, float]:
    """Left and right ghost values by cubic extrapolation (quadratic on 3 nodes)."""
    if u.size >= 4:
        left = 4.0 * u[0] - 6.0 * u[1] + 4.0 * u[2] - u[3]
        right = 4.0 * u[-1] - 6.0 * u[-2] + 4.0 * u[-3] - u[-4]
    elif u.size == 3:
        left = 3.0 * u[0] - 3.0 * u[1] + u[2]
        right = 3.0 * u[-1] - 3.0 * u[-2] + u[-3]
    else:
        raise DomainError("need at least 3 grid nodes")
    return float(left), float(right)


def _padded(u: np.ndarray, ghost) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    gl, gr = ghost_values(u) if ghost is None else ghost
    return np.concatenate(([gl], u, [gr]))


def laplacian(u: np.ndarray, dz: float, ghost: tuple[float, float] | None = None) -> np.ndarray:
    """Three-point second difference at every node, boundaries included."""
    p = _padded(u, ghost)
    return (p[:-2] - 2.0 * p[1:-1] + p[2:]) / (dz * dz)


def grad_sq(u: np.ndarray, dz: float, ghost: tuple[float, float] | None = None) -> np.ndarray:
    """Monotone squared gradient ``max(D+^2, D-^2)``.

    ``D+ = (u_j - u_{j-1})/dz`` counts only when negative and
    ``D- = (u_{j+1} - u_j)/dz`` only when positive.
    """
    p = _padded(u, ghost)
    back = (p[1:-1] - p[:-2]) / dz
    fwd = (p[2:] - p[1:-1]) / dz
    bsq = np.where(back < 0.0, back * back, 0.0)
    fsq = np.where(fwd > 0.0, fwd * fwd, 0.0)
    return np.maximum(bsq, fsq)


def normalized_density(u: np.ndarray, eps: float) -> np.ndarray:
    """``n_k / (dz sum n)`` times ``dz``: probability weights from max-shifted exponentials."""
    w = np.exp((u - u.max()) / eps)
    return w / w.sum()


def transfer_matrix(z: np.ndarray, H) -> np.ndarray:
    """``M[k, j] = H(z_j - z_k)``; rows are contiguous per source node."""
    return np.ascontiguousarray(H(z[None, :] - z[:, None]))


def transfer_sum(u: np.ndarray, HT: np.ndarray, eps: float, cutoff: float = 0.0) -> np.ndarray:
    """``sum_k H(z_j - z_k) p_k`` with ``p`` the normalised density.

    ``cutoff=0`` gives the dense direct sum; a positive cutoff skips
    negligible source nodes.
    """
    p = normalized_density(u, eps)
    if cutoff > 0.0:
        idx = np.nonzero(p > cutoff)[0]
        return p[idx] @ HT[idx]
    return p @ HT
