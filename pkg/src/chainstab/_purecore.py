"""Pure-Python stepping core: Dormand-Prince 5(4) over one smooth window.

This is the fallback twin of the compiled core in ``_fastcore.pyx``. Both
implement the exact same arithmetic, operation for operation, so results do
not depend on which backend got selected at import time. Keep any change
here mirrored in the .pyx file.

A "window" is a time span on which the right-hand side is smooth: the held
control is constant and the disturbance has no mesh breakpoints inside.
Built-in vector fields are dispatched by ``kernel_id`` so the hot loop never
touches user Python code:

    0  generic: f_py(t, x_tuple) -> sequence of n floats
    1  jet engine, n=2, l=2:  (d1*x1 + 1.5*d2*x1^2 - 0.5*x1^3 + x2, u)
    2  scalar square drift, n=1, l=0:  (x^2 + u,)

Disturbance axes are encoded as clipped sinusoids c0 + c1*sin(c2*t),
clamped to [lo, hi]; constants use c1 = 0.
"""

from __future__ import annotations

from math import ceil, isfinite, sin, sqrt

BACKEND_NAME = "pure"

# Dormand-Prince 5(4) tableau.
_C2 = 1.0 / 5.0
_C3 = 3.0 / 10.0
_C4 = 4.0 / 5.0
_C5 = 8.0 / 9.0

_A21 = 1.0 / 5.0
_A31 = 3.0 / 40.0
_A32 = 9.0 / 40.0
_A41 = 44.0 / 45.0
_A42 = -56.0 / 15.0
_A43 = 32.0 / 9.0
_A51 = 19372.0 / 6561.0
_A52 = -25360.0 / 2187.0
_A53 = 64448.0 / 6561.0
_A54 = -212.0 / 729.0
_A61 = 9017.0 / 3168.0
_A62 = -355.0 / 33.0
_A63 = 46732.0 / 5247.0
_A64 = 49.0 / 176.0
_A65 = -5103.0 / 18656.0
_A71 = 35.0 / 384.0
_A73 = 500.0 / 1113.0
_A74 = 125.0 / 192.0
_A75 = -2187.0 / 6784.0
_A76 = 11.0 / 84.0

# 5th-order minus embedded 4th-order weights (error estimator).
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0

_EPS_STEP = 4.440892098500626e-16  # 2*eps, step-underflow guard

STATUS_OK = 0
STATUS_ESCAPE = 1
STATUS_STEP_LIMIT = 2


def _eval_d(t, c0, c1, c2, lo, hi):
    raw = c0 if c1 == 0.0 else c0 + c1 * sin(c2 * t)
    if raw < lo:
        raw = lo
    if raw > hi:
        raw = hi
    return raw


def _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t, y, out):
    if kernel_id == 1:
        d1 = _eval_d(t, d_c0[0], d_c1[0], d_c2[0], d_lo[0], d_hi[0])
        d2 = _eval_d(t, d_c0[1], d_c1[1], d_c2[1], d_lo[1], d_hi[1])
        x1 = y[0]
        out[0] = d1 * x1 + 1.5 * d2 * x1 * x1 - 0.5 * x1 * x1 * x1 + y[1]
        out[1] = u[0]
    elif kernel_id == 2:
        out[0] = y[0] * y[0] + u[0]
    else:
        val = f_py(t, tuple(y))
        for i in range(len(out)):
            out[i] = float(val[i])


def integrate_window(
    kernel_id,
    f_py,
    u,
    d_c0,
    d_c1,
    d_c2,
    d_lo,
    d_hi,
    x0,
    t0,
    t1,
    rtol,
    atol,
    h0,
    max_step,
    blowup,
    max_steps,
    lin_atol,
    lin_rtol,
    dense_cap,
):
    """Integrate one smooth window [t0, t1], landing exactly on t1.

    Returns (status, ts, ys_flat, steps_taken, h_next). The initial point is
    not emitted. Accepted steps are subdivided (up to ``dense_cap`` pieces,
    Hermite interpolation) so that linear interpolation between stored points
    stays within ``lin_atol + lin_rtol * max(1, |y|)``, estimated from the
    Hermite-versus-chord gap of the step.
    """
    n = len(x0)
    y = [float(v) for v in x0]
    k1 = [0.0] * n
    k2 = [0.0] * n
    k3 = [0.0] * n
    k4 = [0.0] * n
    k5 = [0.0] * n
    k6 = [0.0] * n
    k7 = [0.0] * n
    yt = [0.0] * n
    ynew = [0.0] * n

    _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t0, y, k1)

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
    steps = 0
    status = STATUS_OK
    h_next = h

    while t < t1:
        steps += 1
        if steps > max_steps:
            status = STATUS_STEP_LIMIT
            break
        final = h >= t1 - t
        if final:
            h = t1 - t
        elif h < _EPS_STEP * (abs(t) if abs(t) > 1.0 else 1.0):
            status = STATUS_STEP_LIMIT
            break

        for i in range(n):
            yt[i] = y[i] + h * (_A21 * k1[i])
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t + _C2 * h, yt, k2)
        for i in range(n):
            yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t + _C3 * h, yt, k3)
        for i in range(n):
            yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t + _C4 * h, yt, k4)
        for i in range(n):
            yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t + _C5 * h, yt, k5)
        for i in range(n):
            yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i])
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t + h, yt, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (_A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i])
        t_new = t1 if final else t + h
        _rhs(kernel_id, f_py, u, d_c0, d_c1, d_c2, d_lo, d_hi, t_new, ynew, k7)

        err2 = 0.0
        for i in range(n):
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            e /= sc
            err2 += e * e
        err = sqrt(err2 / n)

        if not err <= 1.0:
            # rejected step (also catches non-finite error)
            if isfinite(err):
                fac = 0.8 * err**-0.2
                if fac < 0.2:
                    fac = 0.2
            else:
                fac = 0.2
            h *= fac
            continue

        # accepted: densify output so chord interpolation meets the lin tolerance
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
                m = int(ceil(sqrt(est / target)))
                if m > dense_cap:
                    m = dense_cap
            else:
                m = 1
            for j in range(1, m):
                theta = j / m
                om = 1.0 - theta
                w = theta * om
                ts_out.append(t + theta * h)
                for i in range(n):
                    dly = ynew[i] - y[i]
                    ys_out.append(y[i] + dly * theta + w * (om * (h * k1[i] - dly) + theta * (dly - h * k7[i])))
        ts_out.append(t_new)
        ys_out.extend(ynew)

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
            fac = 0.8 * err**-0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        h *= fac
        if h > max_step:
            h = max_step
        h_next = h

    return status, ts_out, ys_out, steps, h_next
