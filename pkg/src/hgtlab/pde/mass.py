"""Implicit total-mass update.

The new mass ``y`` solves ``y * exp(y dt / eps) = S`` with
``S = dz * sum_j exp(A_j / eps)``. Two equivalent residuals are used::

    h(y) = y exp(y dt / eps) - S                      (small masses)
    g(y) = -eps ln y - dt y + eps ln S                (otherwise)

Only ``ln S`` is ever formed, so ``S`` itself may exceed the float range.
The scalar code below is plain ``math`` so numba can compile it unchanged.
"""

from __future__ import annotations

import math

H_FORM_BELOW = 0.1
RTOL = 1e-12
MAXITER = 100

FORM_AUTO = 0
FORM_H = 1
FORM_G = 2


def solve_mass(log_s, dt, eps, rho_prev, form=FORM_AUTO):
    """Positive root of ``y exp(y dt/eps) = exp(log_s)``; returns NaN on bad input.

    ``form`` picks the residual: automatic (h below 0.1 by ``rho_prev``), h, or g.
    Safeguarded Newton inside a shrinking bracket, bisection as fallback.
    """
    if not (math.isfinite(log_s) and dt > 0.0 and eps > 0.0):
        return math.nan
    k = dt / eps
    # ln y + k y = log_s brackets the root
    if log_s > 0.0:
        hi = max(1.0, log_s / k)
        if log_s < 700.0:
            hi = min(hi, math.exp(log_s))
    else:
        hi = math.exp(log_s)
    lo = max(math.exp(log_s - k * hi), 1e-300)
    # the h-form needs exp(log_s) and exp(k y) representable on the bracket
    h_ok = log_s < 700.0 and k * hi < 700.0
    if form == FORM_AUTO:
        use_h = rho_prev < H_FORM_BELOW and h_ok
    else:
        use_h = form == FORM_H and h_ok
    s = math.exp(log_s) if use_h else 0.0
    y = rho_prev
    if not (y > lo and y < hi):
        y = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)

    for _ in range(MAXITER):
        # f increasing in y for both forms
        if use_h:
            e = math.exp(k * y)
            f = y * e - s
            df = e * (1.0 + k * y)
        else:
            f = eps * math.log(y) + dt * y - eps * log_s
            df = eps / y + dt
        if f < 0.0:
            lo = y
        elif f > 0.0:
            hi = y
        else:
            return y
        y_new = y - f / df
        if not (y_new > lo and y_new < hi):
            y_new = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if abs(y_new - y) <= RTOL * y_new:
            return y_new
        y = y_new

    # bisection fallback on the log-form residual
    for _ in range(400):
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        f = math.log(mid) + k * mid - log_s
        if f < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= RTOL * hi:
            break
    return 0.5 * (lo + hi)
