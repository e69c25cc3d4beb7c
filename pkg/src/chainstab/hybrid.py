"""Closed-loop hybrid simulation under zero-order hold.

One simulation step: sample the state at tau_i, evaluate the feedback,
compute tau_{i+1} = tau_i + h * exp(-d_tilde(tau_i)), integrate with the
held control on [tau_i, tau_{i+1}), hand the left limit over as the next
sample. The perturbation d_tilde is sampled only at sampling instants.

Finite escape or a step-limit hit terminates the run; the partial
trajectory is returned with the termination cause, not raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import DisturbanceSignal, SchedulePerturbation
from .integrate import DEFAULT_CONFIG, IntegratorConfig, STATUS_ESCAPE, STATUS_OK, integrate_held_raw

TERMINATED_T_END = "reached_t_end"
TERMINATED_ESCAPE = "finite_escape"
TERMINATED_STEP_LIMIT = "step_limit"


def realized_instants(h: float, d_tilde: SchedulePerturbation, t_end: float) -> list:
    """Sampling instants tau_0 = 0 < tau_1 < ... within [0, t_end]."""
    if h <= 0.0:
        raise ValueError("base period h must be positive")
    out = []
    tau = 0.0
    while tau <= t_end:
        out.append(tau)
        gap = h * math.exp(-d_tilde.value(tau))
        if not gap > 0.0 or tau + gap == tau:
            raise ValueError(f"sampling schedule stalled at tau = {tau} (gap = {gap})")
        tau += gap
    return out


@dataclass(frozen=True)
class SamplingSchedule:
    base_period: float
    perturbation: SchedulePerturbation
    instants: tuple

    @classmethod
    def realize(cls, h: float, d_tilde: SchedulePerturbation, t_end: float) -> "SamplingSchedule":
        return cls(h, d_tilde, tuple(realized_instants(h, d_tilde, t_end)))


@dataclass
class Trajectory:
    """Closed-loop solution record.

    Row r of (times, states) belongs to interval i when
    seg_starts[i] <= r < seg_starts[i+1]; the row at seg_starts[i] is the
    sampling instant tau_i (control there is the freshly computed u_i).
    ``cell_indices[i]`` is the chain cell of x(tau_i), or -1 when the
    feedback carries no chain.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray      # (num_intervals, m), held value per interval
    cell_indices: np.ndarray  # (num_intervals,)
    seg_starts: np.ndarray    # (num_intervals,), row index of each tau_i
    t_end: float
    base_period: float
    termination: str
    escape_time: Optional[float] = None

    @property
    def instants(self) -> np.ndarray:
        return self.times[self.seg_starts]

    @property
    def instant_states(self) -> np.ndarray:
        return self.states[self.seg_starts]

    def norms(self) -> np.ndarray:
        return np.sqrt((self.states * self.states).sum(axis=1))

    def sup_norm(self) -> float:
        return float(self.norms().max())

    def interval_of_row(self) -> np.ndarray:
        """Interval index for every dense row."""
        return np.searchsorted(self.seg_starts, np.arange(self.times.size), side="right") - 1

    def state_at(self, t: float) -> tuple:
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t = {t} outside recorded range")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i >= self.times.size - 1:
            return tuple(self.states[-1])
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return tuple(self.states[i] + w * (self.states[i + 1] - self.states[i]))

    def last_exit_time(self, radius: float) -> Optional[float]:
        """Last recorded time with |x| > radius; None if never outside."""
        outside = np.nonzero(self.norms() > radius)[0]
        if outside.size == 0:
            return None
        return float(self.times[outside[-1]])


def simulate_closed_loop(sys, fb, x0: Sequence[float], d_sig: DisturbanceSignal,
                         d_tilde: SchedulePerturbation, t_end: float,
                         cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Run the sampled-data closed loop from x0 up to t_end.

    ``fb`` is a PiecewiseFeedback (anything with .period, .classify_cell and
    .control_for_cell works). If a sampling instant falls beyond t_end the
    final interval is truncated for reporting but the feedback is not
    re-evaluated there.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    h = fb.period
    if h <= 0.0:
        raise ValueError("feedback period must be positive")
    n = sys.n
    x = tuple(float(v) for v in x0)
    times = [0.0]
    flat = list(x)
    controls = []
    cells = []
    seg_starts = []
    termination = TERMINATED_T_END
    escape_time = None
    tau = 0.0
    h_carry = cfg.initial_step or 0.0
    exp = math.exp

    while tau < t_end:
        cell = fb.classify_cell(x)
        u = fb.control_for_cell(cell, x)
        seg_starts.append(len(times) - 1)
        controls.append(u)
        cells.append(cell)
        gap = h * exp(-d_tilde.value(tau))
        if not gap > 0.0 or tau + gap == tau:
            raise ValueError(f"sampling schedule stalled at tau = {tau}")
        tau_next = tau + gap
        t1 = tau_next if tau_next <= t_end else t_end
        status, ts, ys, h_carry, _ = integrate_held_raw(sys, d_sig, x, u, tau, t1, cfg, h0=h_carry)
        times.extend(ts)
        flat.extend(ys)
        if status == STATUS_ESCAPE:
            termination = TERMINATED_ESCAPE
            escape_time = times[-1]
            break
        if status != STATUS_OK:
            termination = TERMINATED_STEP_LIMIT
            break
        # left-limit handoff: next sample is the last computed state, by value
        x = tuple(ys[-n:])
        tau = tau_next

    times_arr = np.asarray(times)
    states = np.asarray(flat).reshape(len(times), n)
    return Trajectory(
        times=times_arr,
        states=states,
        controls=np.asarray(controls, dtype=float).reshape(len(controls), sys.m),
        cell_indices=np.asarray(cells, dtype=np.int64),
        seg_starts=np.asarray(seg_starts, dtype=np.int64),
        t_end=t_end,
        base_period=h,
        termination=termination,
        escape_time=escape_time,
    )
