# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping core: Dormand-Prince 5(4) over one smooth window.

Twin of ``_purecore.py``. The arithmetic here mirrors the pure-Python
implementation operation for operation (same tableau literals, same
evaluation order, same libm calls), so switching backends does not change
results. Keep both files in sync.
"""

from libc.math cimport ceil, fabs, isfinite, pow, sin, sqrt
from libc.stdlib cimport free, malloc

BACKEND_NAME = "compiled"

cdef double _C2 = 1.0 / 5.0
cdef double _C3 = 3.0 / 10.0
cdef double _C4 = 4.0 / 5.0
cdef double _C5 = 8.0 / 9.0

cdef double _A21 = 1.0 / 5.0
cdef double _A31 = 3.0 / 40.0
cdef double _A32 = 9.0 / 40.0
cdef double _A41 = 44.0 / 45.0
cdef double _A42 = -56.0 / 15.0
cdef double _A43 = 32.0 / 9.0
cdef double _A51 = 19372.0 / 6561.0
cdef double _A52 = -25360.0 / 2187.0
cdef double _A53 = 64448.0 / 6561.0
cdef double _A54 = -212.0 / 729.0
cdef double _A61 = 9017.0 / 3168.0
cdef double _A62 = -355.0 / 33.0
cdef double _A63 = 46732.0 / 5247.0
cdef double _A64 = 49.0 / 176.0
cdef double _A65 = -5103.0 / 18656.0
cdef double _A71 = 35.0 / 384.0
cdef double _A73 = 500.0 / 1113.0
cdef double _A74 = 125.0 / 192.0
cdef double _A75 = -2187.0 / 6784.0
cdef double _A76 = 11.0 / 84.0

cdef double _E1 = 71.0 / 57600.0
cdef double _E3 = -71.0 / 16695.0
cdef double _E4 = 71.0 / 1920.0
cdef double _E5 = -17253.0 / 339200.0
cdef double _E6 = 22.0 / 525.0
cdef double _E7 = -1.0 / 40.0

cdef double _EPS_STEP = 4.440892098500626e-16

STATUS_OK = 0
STATUS_ESCAPE = 1
STATUS_STEP_LIMIT = 2


cdef inline double _eval_d(double t, double c0, double c1, double c2,
                           double lo, double hi):
    cdef double raw
    if c1 == 0.0:
        raw = c0
    else:
        raw = c0 + c1 * sin(c2 * t)
    if raw < lo:
        raw = lo
    if raw > hi:
        raw = hi
    return raw


cdef int _rhs(int kernel_id, object f_py, double* u, int n,
              double* d_c0, double* d_c1, double* d_c2,
              double* d_lo, double* d_hi,
              double t, double* y, double* out) except -1:
    cdef double d1, d2, x1
    cdef int i
    cdef object val
    if kernel_id == 1:
        d1 = _eval_d(t, d_c0[0], d_c1[0], d_c2[0], d_lo[0], d_hi[0])
        d2 = _eval_d(t, d_c0[1], d_c1[1], d_c2[1], d_lo[1], d_hi[1])
        x1 = y[0]
        out[0] = d1 * x1 + 1.5 * d2 * x1 * x1 - 0.5 * x1 * x1 * x1 + y[1]
        out[1] = u[0]
    elif kernel_id == 2:
        out[0] = y[0] * y[0] + u[0]
    else:
        val = f_py(t, tuple([y[i] for i in range(n)]))
        for i in range(n):
            out[i] = float(val[i])
    return 0


def integrate_window(
    int kernel_id,
    object f_py,
    object u,
    object d_c0,
    object d_c1,
    object d_c2,
    object d_lo,
    object d_hi,
    object x0,
    double t0,
    double t1,
    double rtol,
    double atol,
    double h0,
    double max_step,
    double blowup,
    long max_steps,
    double lin_atol,
    double lin_rtol,
    long dense_cap,
):
    """Compiled counterpart of ``_purecore.integrate_window``."""
    cdef int n = len(x0)
    cdef int l = len(d_c0)
    cdef int nu = len(u)
    cdef double* buf = <double*> malloc(sizeof(double) * (10 * n + 5 * l + nu + 2))
    if buf == NULL:
        raise MemoryError()
    cdef double* y = buf
    cdef double* k1 = buf + n
    cdef double* k2 = buf + 2 * n
    cdef double* k3 = buf + 3 * n
    cdef double* k4 = buf + 4 * n
    cdef double* k5 = buf + 5 * n
    cdef double* k6 = buf + 6 * n
    cdef double* k7 = buf + 7 * n
    cdef double* yt = buf + 8 * n
    cdef double* ynew = buf + 9 * n
    cdef double* c0 = buf + 10 * n
    cdef double* c1 = c0 + l
    cdef double* c2 = c0 + 2 * l
    cdef double* lo = c0 + 3 * l
    cdef double* hi = c0 + 4 * l
    cdef double* uu = c0 + 5 * l

    cdef int i, j
    cdef long m
    cdef long steps = 0
    cdef int status = STATUS_OK
    cdef bint final
    cdef double t, t_new, h, span, h_next, blow2
    cdef double err, err2, e, sc, ay, an, fac
    cdef double sumsq, est, s2, w1, w2, g, theta, om, w, dly, ynorm, target

    try:
        for i in range(n):
            y[i] = float(x0[i])
        for i in range(l):
            c0[i] = float(d_c0[i])
            c1[i] = float(d_c1[i])
            c2[i] = float(d_c2[i])
            lo[i] = float(d_lo[i])
            hi[i] = float(d_hi[i])
        for i in range(nu):
            uu[i] = float(u[i])

        _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t0, y, k1)

        span = t1 - t0
        h = h0
        if not h > 0.0:
            h = span
        if h > max_step:
            h = max_step
        if h > span:
            h = span

        blow2 = blowup * blowup
        t = t0
        ts_out = []
        ys_out = []
        h_next = h

        while t < t1:
            steps += 1
            if steps > max_steps:
                status = STATUS_STEP_LIMIT
                break
            final = h >= t1 - t
            if final:
                h = t1 - t
            elif h < _EPS_STEP * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = STATUS_STEP_LIMIT
                break

            for i in range(n):
                yt[i] = y[i] + h * (_A21 * k1[i])
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t + _C2 * h, yt, k2)
            for i in range(n):
                yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t + _C3 * h, yt, k3)
            for i in range(n):
                yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t + _C4 * h, yt, k4)
            for i in range(n):
                yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t + _C5 * h, yt, k5)
            for i in range(n):
                yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i])
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t + h, yt, k6)
            for i in range(n):
                ynew[i] = y[i] + h * (_A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i])
            t_new = t1 if final else t + h
            _rhs(kernel_id, f_py, uu, n, c0, c1, c2, lo, hi, t_new, ynew, k7)

            err2 = 0.0
            for i in range(n):
                e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
                ay = fabs(y[i])
                an = fabs(ynew[i])
                sc = atol + rtol * (ay if ay > an else an)
                e /= sc
                err2 += e * e
            err = sqrt(err2 / n)

            if not err <= 1.0:
                if isfinite(err):
                    fac = 0.8 * pow(err, -0.2)
                    if fac < 0.2:
                        fac = 0.2
                else:
                    fac = 0.2
                h *= fac
                continue

            sumsq = 0.0
            for i in range(n):
                sumsq += ynew[i] * ynew[i]
            if dense_cap > 1:
                est = 0.0
                for theta in (0.25, 0.5, 0.75):
                    s2 = 0.0
                    w1 = theta * (1.0 - theta) * (1.0 - theta)
                    w2 = theta * theta * (1.0 - theta)
                    for i in range(n):
                        dly = ynew[i] - y[i]
                        g = w1 * (h * k1[i] - dly) + w2 * (dly - h * k7[i])
                        s2 += g * g
                    s2 = sqrt(s2)
                    if s2 > est:
                        est = s2
                ynorm = sqrt(sumsq)
                target = lin_atol + lin_rtol * (ynorm if ynorm > 1.0 else 1.0)
                if est > target and isfinite(est) and target > 0.0:
                    m = <long> ceil(sqrt(est / target))
                    if m > dense_cap:
                        m = dense_cap
                else:
                    m = 1
                for j in range(1, m):
                    theta = j / (<double> m)
                    om = 1.0 - theta
                    w = theta * om
                    ts_out.append(t + theta * h)
                    for i in range(n):
                        dly = ynew[i] - y[i]
                        ys_out.append(y[i] + dly * theta + w * (om * (h * k1[i] - dly) + theta * (dly - h * k7[i])))
            ts_out.append(t_new)
            for i in range(n):
                ys_out.append(ynew[i])

            if sumsq > blow2 or not isfinite(sumsq):
                status = STATUS_ESCAPE
                t = t_new
                break

            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            t = t_new

            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.8 * pow(err, -0.2)
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            h *= fac
            if h > max_step:
                h = max_step
            h_next = h

        return status, ts_out, ys_out, steps, h_next
    finally:
        free(buf)
