"""Controlled-accuracy integration of x' = f(d(t), x, u) with u held constant.

The flow is computed by an embedded Dormand-Prince 5(4) pair with
error-per-step control; the interval endpoint is hit exactly by clipping
the final step. Disturbance discontinuities (mesh points of the signal)
are window boundaries, so no step straddles a discontinuity and the formal
order is preserved on piecewise-smooth right-hand sides.

Finite escape is a first-class outcome: exceeding the blow-up norm
threshold raises :class:`FiniteEscape` carrying the escape time and the
partial dense segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _backend
from ._purecore import STATUS_ESCAPE, STATUS_OK, STATUS_STEP_LIMIT
from .dynamics import ControlOutOfSet, ControlSystem, DimensionMismatch, DisturbanceSignal


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    initial_step: Optional[float] = None
    max_step: float = math.inf
    blowup_norm_threshold: float = 1e8
    max_steps: int = 10_000_000
    # stored grids are dense enough that chord interpolation stays within
    # dense_factor * (abs_tol + rel_tol * max(1, |x|)), up to dense_cap
    # subdivisions per accepted step
    dense_factor: float = 10.0
    dense_cap: int = 64

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.blowup_norm_threshold <= 0.0:
            raise ValueError("blowup_norm_threshold must be positive")
        if self.max_steps <= 0 or self.max_step <= 0.0:
            raise ValueError("max_steps and max_step must be positive")
        if self.initial_step is not None and self.initial_step <= 0.0:
            raise ValueError("initial_step must be positive when given")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class DenseSegment:
    """Solution record on one held-control interval [t_start, t_end]."""

    times: np.ndarray
    states: np.ndarray
    control: tuple
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape != (self.times.size, self.states.shape[1]):
            raise ValueError("times must be 1-d and states (len(times), n)")
        if self.times.size < 1:
            raise ValueError("segment needs at least one point")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if self.times[0] != self.t_start or self.times[-1] != self.t_end:
            raise ValueError("segment grid must span [t_start, t_end] exactly")

    @property
    def end_state(self) -> tuple:
        return tuple(self.states[-1])

    def state_at(self, t: float) -> tuple:
        """Linear interpolation on the stored grid."""
        if not self.t_start <= t <= self.t_end:
            raise ValueError(f"t = {t} outside [{self.t_start}, {self.t_end}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i >= self.times.size - 1:
            return tuple(self.states[-1])
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return tuple(self.states[i] + w * (self.states[i + 1] - self.states[i]))

    def max_norm(self) -> float:
        return float(np.sqrt((self.states * self.states).sum(axis=1)).max())


class FiniteEscape(RuntimeError):
    """Solution norm exceeded the blow-up threshold before the endpoint."""

    def __init__(self, escape_time: float, segment: DenseSegment):
        super().__init__(f"finite escape at t = {escape_time}")
        self.escape_time = escape_time
        self.segment = segment


class StepLimitExceeded(RuntimeError):
    def __init__(self, message: str, segment: DenseSegment):
        super().__init__(message)
        self.segment = segment


def _held_rhs(sys: ControlSystem, d_sig: DisturbanceSignal, u: tuple):
    rhs = sys.rhs
    value = d_sig.value

    def f(t, x):
        return rhs(value(t), x, u)

    return f


def integrate_held_raw(sys, d_sig, x0, u, t0, t1, cfg, h0=0.0):
    """Window-splitting driver over the backend kernel; list-level output.

    Returns (status, ts, ys_flat, h_next, steps) where ts excludes t0.
    Used directly by the closed-loop simulator to avoid per-interval array
    churn; :func:`integrate_held` wraps it into a DenseSegment.
    """
    kernel = _backend.get_backend().integrate_window
    lin_atol = cfg.dense_factor * cfg.abs_tol
    lin_rtol = cfg.dense_factor * cfg.rel_tol
    dense_cap = cfg.dense_cap if cfg.dense_factor > 0.0 else 1
    generic = sys.kernel_id == 0
    f_py = _held_rhs(sys, d_sig, u) if generic else None
    if generic:
        d_c0 = d_c1 = d_c2 = d_lo = d_hi = ()
    else:
        d_lo, d_hi = sys.disturbance_box.lo, sys.disturbance_box.hi

    cuts = [t0] + d_sig.breakpoints(t0, t1) + [t1]
    ts_all = []
    ys_all = []
    budget = cfg.max_steps
    h = h0
    status = STATUS_OK
    for w0, w1 in zip(cuts, cuts[1:]):
        if not generic:
            d_c0, d_c1, d_c2 = d_sig.window_coeffs(w0, w1)
        x_start = tuple(ys_all[-sys.n:]) if ys_all else tuple(x0)
        status, ts, ys, steps, h = kernel(
            sys.kernel_id if not generic else 0,
            f_py,
            tuple(u),
            d_c0,
            d_c1,
            d_c2,
            d_lo,
            d_hi,
            x_start,
            w0,
            w1,
            cfg.rel_tol,
            cfg.abs_tol,
            h,
            cfg.max_step,
            cfg.blowup_norm_threshold,
            budget,
            lin_atol,
            lin_rtol,
            dense_cap,
        )
        ts_all.extend(ts)
        ys_all.extend(ys)
        budget -= steps
        if status != STATUS_OK or budget <= 0:
            if status == STATUS_OK:
                status = STATUS_STEP_LIMIT
            break
    return status, ts_all, ys_all, h, cfg.max_steps - budget


def _segment_from_raw(sys, x0, u, t0, ts, ys) -> DenseSegment:
    n = sys.n
    times = np.empty(len(ts) + 1)
    times[0] = t0
    times[1:] = ts
    states = np.empty((len(ts) + 1, n))
    states[0] = x0
    if ts:
        states[1:] = np.asarray(ys).reshape(len(ts), n)
    return DenseSegment(times=times, states=states, control=tuple(u),
                        t_start=t0, t_end=times[-1])


def integrate_held(sys: ControlSystem, d_sig: DisturbanceSignal, x0: Sequence[float],
                   u: Sequence[float], t0: float, t1: float,
                   cfg: IntegratorConfig = DEFAULT_CONFIG) -> DenseSegment:
    """Integrate with u held constant on [t0, t1], landing exactly on t1."""
    if not t1 > t0:
        raise ValueError(f"t1 = {t1} must exceed t0 = {t0}")
    if len(x0) != sys.n:
        raise DimensionMismatch(f"x0 length {len(x0)} != n = {sys.n}")
    if len(u) != sys.m:
        raise DimensionMismatch(f"u length {len(u)} != m = {sys.m}")
    if not sys.control_set.contains(u):
        raise ControlOutOfSet(f"u = {tuple(u)} outside U")
    x0 = tuple(float(v) for v in x0)
    u = tuple(float(v) for v in u)
    status, ts, ys, _, _ = integrate_held_raw(
        sys, d_sig, x0, u, t0, t1, cfg, h0=cfg.initial_step or 0.0
    )
    seg = _segment_from_raw(sys, x0, u, t0, ts, ys)
    if status == STATUS_ESCAPE:
        raise FiniteEscape(seg.t_end, seg)
    if status == STATUS_STEP_LIMIT:
        raise StepLimitExceeded(
            f"step limit {cfg.max_steps} exhausted (or step size underflow) at t = {seg.t_end}", seg
        )
    return seg


def first_hitting_time(seg: DenseSegment, region) -> Optional[float]:
    """Earliest time the segment enters the region, or None.

    Scans the stored grid for the first point inside, then bisects on the
    chord between the last outside point and that point down to 1e-9 time
    resolution. Entries that begin and end strictly between two adjacent
    stored points are invisible at the stored resolution.
    """
    times, states = seg.times, seg.states
    inside_idx = None
    for i in range(times.size):
        if region.contains(tuple(states[i])):
            inside_idx = i
            break
    if inside_idx is None:
        return None
    if inside_idx == 0:
        return float(times[0])
    lo_t, hi_t = float(times[inside_idx - 1]), float(times[inside_idx])
    lo_x, hi_x = states[inside_idx - 1], states[inside_idx]
    while hi_t - lo_t > 1e-9:
        mid = 0.5 * (lo_t + hi_t)
        w = (mid - float(times[inside_idx - 1])) / (float(times[inside_idx]) - float(times[inside_idx - 1]))
        xm = tuple(lo_x + w * (hi_x - lo_x))
        if region.contains(xm):
            hi_t = mid
        else:
            lo_t = mid
    return hi_t


def reference_rk4(f, x0: Sequence[float], t0: float, t1: float, step: float) -> tuple:
    """Fixed-step classical 4th-order reference integrator (oracle use).

    Deliberately independent of the adaptive path: no error control, no
    dense output. f is f(t, x) -> sequence.
    """
    n = len(x0)
    y = [float(v) for v in x0]
    steps = max(1, int(round((t1 - t0) / step)))
    h = (t1 - t0) / steps
    t = t0
    for _ in range(steps):
        k1 = f(t, tuple(y))
        k2 = f(t + 0.5 * h, tuple(y[i] + 0.5 * h * k1[i] for i in range(n)))
        k3 = f(t + 0.5 * h, tuple(y[i] + 0.5 * h * k2[i] for i in range(n)))
        k4 = f(t + h, tuple(y[i] + h * k3[i] for i in range(n)))
        for i in range(n):
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t += h
    return tuple(y)
