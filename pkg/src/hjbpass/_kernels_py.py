"""Pure-numpy implementations of the per-point evaluation kernels.

These are the reference semantics for the compiled extension in
``_kernels.pyx``; both backends must implement the same algorithms in the
same order so that results agree to rounding.  The public entry points are

``eval_point``
    Value, gradient and Hessian of a tensor-product scaled-Legendre series
    at a single point.

``eta_inverse``
    Newton inversion of the gradient map ``z -> grad(z)`` of such a series,
    with an early exit once the residual is at machine level.

``value_diff``
    Cancellation-free difference of the series between two points, exact
    relative to the point separation.  Plain subtraction of two values has
    an absolute error floor set by the magnitude of the largest partial
    sums; two-point energy differences between nearby states (discrete-
    gradient stepping) need far better, so the difference is built from
    divided-difference recurrences that carry the separation as an
    explicit factor.
"""

from __future__ import annotations

import math

import numpy as np

#: Maximum per-axis basis size supported, ``None`` meaning unbounded.
MAX_DEGREE = None


def _tableau(x: float, lo: float, hi: float, d: int):
    """Scaled-Legendre values and first/second derivatives at scalar ``x``.

    The i-th function (0-indexed) is ``sqrt((2i+1)/(hi-lo)) * P_i(t(x))``
    with ``t`` the affine map onto [-1, 1]; the family is L2-orthonormal
    on [lo, hi].
    """
    t = (2.0 * x - (lo + hi)) / (hi - lo)
    s = 2.0 / (hi - lo)
    p = np.empty(d)
    dp = np.empty(d)
    ddp = np.empty(d)
    p[0] = 1.0
    dp[0] = 0.0
    ddp[0] = 0.0
    if d > 1:
        p[1] = t
        dp[1] = 1.0
        ddp[1] = 0.0
    for k in range(1, d - 1):
        c = 2.0 * k + 1.0
        p[k + 1] = (c * t * p[k] - k * p[k - 1]) / (k + 1.0)
        dp[k + 1] = dp[k - 1] + c * p[k]
        ddp[k + 1] = ddp[k - 1] + c * dp[k]
    scale = np.sqrt((2.0 * np.arange(d) + 1.0) / (hi - lo))
    return scale * p, scale * dp * s, scale * ddp * (s * s)


def eval_point(alpha, offset, x_lo, x_hi, y_lo, y_hi, x, y):
    """Evaluate ``offset + sum_ij alpha[i,j] phi_i(x) phi_j(y)`` and derivatives.

    Returns ``(v, gx, gy, hxx, hxy, hyy)``.
    """
    d = alpha.shape[0]
    px, dx, sx = _tableau(x, x_lo, x_hi, d)
    py, dy, sy = _tableau(y, y_lo, y_hi, d)
    a_py = alpha @ py
    a_dy = alpha @ dy
    a_sy = alpha @ sy
    v = float(px @ a_py) + offset
    gx = float(dx @ a_py)
    gy = float(px @ a_dy)
    hxx = float(sx @ a_py)
    hxy = float(dx @ a_dy)
    hyy = float(px @ a_sy)
    return v, gx, gy, hxx, hxy, hyy


def _value_tableau(x: float, lo: float, hi: float, d: int):
    """Scaled-Legendre values only (no derivatives) at scalar ``x``."""
    t = (2.0 * x - (lo + hi)) / (hi - lo)
    p = np.empty(d)
    p[0] = 1.0
    if d > 1:
        p[1] = t
    for k in range(1, d - 1):
        p[k + 1] = ((2.0 * k + 1.0) * t * p[k] - k * p[k - 1]) / (k + 1.0)
    scale = np.sqrt((2.0 * np.arange(d) + 1.0) / (hi - lo))
    return scale * p


def _divided_diff_tableau(x1: float, x2: float, lo: float, hi: float, d: int):
    """Scaled divided differences ``(phi_k(x2) - phi_k(x1)) / (x2 - x1)``.

    Uses the divided-difference analogue of the three-term recurrence:
    with ``D_k = (P_k(t2) - P_k(t1)) / (t2 - t1)``,

        D_{k+1} = ((2k+1) (t1 D_k + P_k(t2)) - k D_{k-1}) / (k+1),

    which follows from the product rule for divided differences applied to
    ``t P_k(t)``.  Every term is O(1); the separation never appears in a
    subtraction, so the result is accurate relative to the separation.
    """
    t1 = (2.0 * x1 - (lo + hi)) / (hi - lo)
    t2 = (2.0 * x2 - (lo + hi)) / (hi - lo)
    s = 2.0 / (hi - lo)
    p2 = np.empty(d)
    dd = np.empty(d)
    p2[0] = 1.0
    dd[0] = 0.0
    if d > 1:
        p2[1] = t2
        dd[1] = 1.0
    for k in range(1, d - 1):
        c = 2.0 * k + 1.0
        p2[k + 1] = (c * t2 * p2[k] - k * p2[k - 1]) / (k + 1.0)
        dd[k + 1] = (c * (t1 * dd[k] + p2[k]) - k * dd[k - 1]) / (k + 1.0)
    scale = np.sqrt((2.0 * np.arange(d) + 1.0) / (hi - lo))
    return scale * dd * s


def value_diff(alpha, x_lo, x_hi, y_lo, y_hi, x1, y1, x2, y2):
    """Series difference ``V(x2, y2) - V(x1, y1)`` without cancellation.

    Split along one axis at a time:
    ``V(x2,y2) - V(x1,y1) = sum_j [phi_j(y2)-phi_j(y1)] a_j(x2)
                          + sum_i [phi_i(x2)-phi_i(x1)] b_i(y1)``
    with ``a_j(x2) = sum_i alpha[i,j] phi_i(x2)`` and
    ``b_i(y1) = sum_j alpha[i,j] phi_j(y1)``; the bracketed per-mode
    differences come from the divided-difference tableau times the
    separation, keeping the separation an explicit factor of the result.
    """
    d = alpha.shape[0]
    px2 = _value_tableau(x2, x_lo, x_hi, d)
    py1 = _value_tableau(y1, y_lo, y_hi, d)
    ddx = _divided_diff_tableau(x1, x2, x_lo, x_hi, d)
    ddy = _divided_diff_tableau(y1, y2, y_lo, y_hi, d)
    a = alpha.T @ px2  # a[j] = sum_i alpha[i,j] phi_i(x2)
    b = alpha @ py1  # b[i] = sum_j alpha[i,j] phi_j(y1)
    return (y2 - y1) * float(ddy @ a) + (x2 - x1) * float(ddx @ b)


def eta_inverse(alpha, x_lo, x_hi, y_lo, y_hi, vx, vy, zx0, zy0, max_steps, exit_tol):
    """Newton-solve ``grad(z) = v`` for the series' gradient map.

    Runs at most ``max_steps`` Newton steps starting from ``(zx0, zy0)``,
    exiting early once ``||grad(z) - v|| <= exit_tol``.  Returns
    ``(zx, zy, gnorm, steps, singular)`` where ``gnorm`` is the final
    residual norm and ``singular`` flags a near-singular Hessian (the
    iterate is returned as-is in that case).
    """
    zx = float(zx0)
    zy = float(zy0)
    for step in range(max_steps):
        _, gx, gy, hxx, hxy, hyy = eval_point(alpha, 0.0, x_lo, x_hi, y_lo, y_hi, zx, zy)
        rx = gx - vx
        ry = gy - vy
        gnorm = math.hypot(rx, ry)
        if gnorm <= exit_tol:
            return zx, zy, gnorm, step, False
        det = hxx * hyy - hxy * hxy
        hmax = max(abs(hxx), abs(hxy), abs(hyy))
        if abs(det) <= 1e-14 * hmax * hmax or hmax == 0.0:
            return zx, zy, gnorm, step, True
        zx -= (hyy * rx - hxy * ry) / det
        zy -= (hxx * ry - hxy * rx) / det
    _, gx, gy, _, _, _ = eval_point(alpha, 0.0, x_lo, x_hi, y_lo, y_hi, zx, zy)
    gnorm = math.hypot(gx - vx, gy - vy)
    return zx, zy, gnorm, max_steps, False
