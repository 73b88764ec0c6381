# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-point evaluation kernels.

Mirrors ``_kernels_py`` (same algorithms, same operation order); see that
module for the contract.  Kept to plain C arithmetic so single-point
evaluation inside nested Newton loops costs a few microseconds.
"""

from libc.math cimport sqrt, fabs, hypot

# Per-axis basis size limit for the stack-allocated tableaus.
MAX_DEGREE = 40

cdef int _MAXD = 40


cdef inline void _tableau(double x, double lo, double hi, int d,
                          double* P, double* D1, double* D2) noexcept nogil:
    cdef double t = (2.0 * x - (lo + hi)) / (hi - lo)
    cdef double s = 2.0 / (hi - lo)
    cdef double p[40]
    cdef double dp[40]
    cdef double ddp[40]
    cdef int k
    cdef double c, scale
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
    for k in range(d):
        scale = sqrt((2.0 * k + 1.0) / (hi - lo))
        P[k] = scale * p[k]
        D1[k] = scale * dp[k] * s
        D2[k] = scale * ddp[k] * (s * s)


cdef inline void _contract(double[:, ::1] alpha, int d,
                           double* px, double* dx, double* sx,
                           double* py, double* dy, double* sy,
                           double* out) noexcept nogil:
    """out = (v_no_offset, gx, gy, hxx, hxy, hyy)."""
    cdef int i, j
    cdef double apy, ady, asy, v, gx, gy, hxx, hxy, hyy
    v = 0.0
    gx = 0.0
    gy = 0.0
    hxx = 0.0
    hxy = 0.0
    hyy = 0.0
    for i in range(d):
        apy = 0.0
        ady = 0.0
        asy = 0.0
        for j in range(d):
            apy += alpha[i, j] * py[j]
            ady += alpha[i, j] * dy[j]
            asy += alpha[i, j] * sy[j]
        v += px[i] * apy
        gx += dx[i] * apy
        gy += px[i] * ady
        hxx += sx[i] * apy
        hxy += dx[i] * ady
        hyy += px[i] * asy
    out[0] = v
    out[1] = gx
    out[2] = gy
    out[3] = hxx
    out[4] = hxy
    out[5] = hyy


def eval_point(double[:, ::1] alpha, double offset,
               double x_lo, double x_hi, double y_lo, double y_hi,
               double x, double y):
    """See ``_kernels_py.eval_point``."""
    cdef int d = alpha.shape[0]
    if d > _MAXD:
        raise ValueError("basis size exceeds compiled kernel limit")
    cdef double px[40]
    cdef double dx[40]
    cdef double sx[40]
    cdef double py[40]
    cdef double dy[40]
    cdef double sy[40]
    cdef double out[6]
    _tableau(x, x_lo, x_hi, d, px, dx, sx)
    _tableau(y, y_lo, y_hi, d, py, dy, sy)
    _contract(alpha, d, px, dx, sx, py, dy, sy, out)
    return out[0] + offset, out[1], out[2], out[3], out[4], out[5]


cdef inline void _value_tableau(double x, double lo, double hi, int d,
                                double* P) noexcept nogil:
    cdef double t = (2.0 * x - (lo + hi)) / (hi - lo)
    cdef double p[40]
    cdef int k
    p[0] = 1.0
    if d > 1:
        p[1] = t
    for k in range(1, d - 1):
        p[k + 1] = ((2.0 * k + 1.0) * t * p[k] - k * p[k - 1]) / (k + 1.0)
    for k in range(d):
        P[k] = sqrt((2.0 * k + 1.0) / (hi - lo)) * p[k]


cdef inline void _divided_diff_tableau(double x1, double x2,
                                       double lo, double hi, int d,
                                       double* DD) noexcept nogil:
    cdef double t1 = (2.0 * x1 - (lo + hi)) / (hi - lo)
    cdef double t2 = (2.0 * x2 - (lo + hi)) / (hi - lo)
    cdef double s = 2.0 / (hi - lo)
    cdef double p2[40]
    cdef double dd[40]
    cdef int k
    cdef double c
    p2[0] = 1.0
    dd[0] = 0.0
    if d > 1:
        p2[1] = t2
        dd[1] = 1.0
    for k in range(1, d - 1):
        c = 2.0 * k + 1.0
        p2[k + 1] = (c * t2 * p2[k] - k * p2[k - 1]) / (k + 1.0)
        dd[k + 1] = (c * (t1 * dd[k] + p2[k]) - k * dd[k - 1]) / (k + 1.0)
    for k in range(d):
        DD[k] = sqrt((2.0 * k + 1.0) / (hi - lo)) * dd[k] * s


def value_diff(double[:, ::1] alpha,
               double x_lo, double x_hi, double y_lo, double y_hi,
               double x1, double y1, double x2, double y2):
    """See ``_kernels_py.value_diff``."""
    cdef int d = alpha.shape[0]
    if d > _MAXD:
        raise ValueError("basis size exceeds compiled kernel limit")
    cdef double px2[40]
    cdef double py1[40]
    cdef double ddx[40]
    cdef double ddy[40]
    cdef int i, j
    cdef double a, b, accx, accy
    _value_tableau(x2, x_lo, x_hi, d, px2)
    _value_tableau(y1, y_lo, y_hi, d, py1)
    _divided_diff_tableau(x1, x2, x_lo, x_hi, d, ddx)
    _divided_diff_tableau(y1, y2, y_lo, y_hi, d, ddy)
    accy = 0.0
    accx = 0.0
    for j in range(d):
        a = 0.0
        for i in range(d):
            a += alpha[i, j] * px2[i]
        accy += ddy[j] * a
    for i in range(d):
        b = 0.0
        for j in range(d):
            b += alpha[i, j] * py1[j]
        accx += ddx[i] * b
    return (y2 - y1) * accy + (x2 - x1) * accx


def eta_inverse(double[:, ::1] alpha,
                double x_lo, double x_hi, double y_lo, double y_hi,
                double vx, double vy, double zx0, double zy0,
                int max_steps, double exit_tol):
    """See ``_kernels_py.eta_inverse``."""
    cdef int d = alpha.shape[0]
    if d > _MAXD:
        raise ValueError("basis size exceeds compiled kernel limit")
    cdef double px[40]
    cdef double dx[40]
    cdef double sx[40]
    cdef double py[40]
    cdef double dy[40]
    cdef double sy[40]
    cdef double out[6]
    cdef double zx = zx0
    cdef double zy = zy0
    cdef double rx, ry, gnorm, det, hmax, t1, t2
    cdef int step
    for step in range(max_steps):
        _tableau(zx, x_lo, x_hi, d, px, dx, sx)
        _tableau(zy, y_lo, y_hi, d, py, dy, sy)
        _contract(alpha, d, px, dx, sx, py, dy, sy, out)
        rx = out[1] - vx
        ry = out[2] - vy
        gnorm = hypot(rx, ry)
        if gnorm <= exit_tol:
            return zx, zy, gnorm, step, False
        det = out[3] * out[5] - out[4] * out[4]
        hmax = fabs(out[3])
        t1 = fabs(out[4])
        t2 = fabs(out[5])
        if t1 > hmax:
            hmax = t1
        if t2 > hmax:
            hmax = t2
        if fabs(det) <= 1e-14 * hmax * hmax or hmax == 0.0:
            return zx, zy, gnorm, step, True
        zx -= (out[5] * rx - out[4] * ry) / det
        zy -= (out[3] * ry - out[4] * rx) / det
    _tableau(zx, x_lo, x_hi, d, px, dx, sx)
    _tableau(zy, y_lo, y_hi, d, py, dy, sy)
    _contract(alpha, d, px, dx, sx, py, dy, sy, out)
    gnorm = hypot(out[1] - vx, out[2] - vy)
    return zx, zy, gnorm, max_steps, False
