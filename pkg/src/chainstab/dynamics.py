"""Disturbed control systems, disturbance signals and schedule perturbations.

A :class:`ControlSystem` bundles the vector field x' = f(d, x, u) with its
dimensions and the admissible disturbance box D and control set U.
Disturbance signals are deterministic functions of time (and a seed); their
emitted values are always clamped into D, and any clamping is detectable up
front via :meth:`DisturbanceSignal.needs_clamping` so runs can report it.

Everything here is immutable after construction and safe to share across
threads; signal sampling is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ._rng import derive_rng, hash_unit


class DimensionMismatch(ValueError):
    """Vector has the wrong length for the declared dimension."""


class DisturbanceOutOfBox(ValueError):
    """Disturbance value lies outside the declared box D."""


class ControlOutOfSet(ValueError):
    """Control value lies outside the declared control set U."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; +-inf bounds give half-lines or all of R^k."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise DimensionMismatch("box lo/hi lengths differ")
        for a, b in zip(self.lo, self.hi):
            if not a <= b:
                raise ValueError(f"empty box interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, v: Sequence[float]) -> bool:
        if len(v) != self.dim:
            raise DimensionMismatch(f"expected length {self.dim}, got {len(v)}")
        return all(a <= x <= b for a, b, x in zip(self.lo, self.hi, v))

    def clip(self, v: Sequence[float]) -> tuple:
        return tuple(min(b, max(a, x)) for a, b, x in zip(self.lo, self.hi, v))

    @classmethod
    def reals(cls, dim: int) -> "Box":
        return cls((-math.inf,) * dim, (math.inf,) * dim)


@dataclass(frozen=True)
class ControlSystem:
    """The right-hand side f(d, x, u) with its constraint descriptors.

    ``kernel_id`` selects a compiled fast path for built-in vector fields
    (0 means generic: the Python callable is used). ``rhs_batch``, when
    given, evaluates f over an (N, n) array of states for one fixed (d, u),
    which certification grid sweeps use.
    """

    label: str
    n: int
    m: int
    l: int
    rhs: Callable[[tuple, tuple, tuple], tuple]
    disturbance_box: Box
    control_set: Box
    origin_equilibrium: bool = False
    kernel_id: int = 0
    rhs_batch: Optional[Callable] = None

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0 or self.l < 0:
            raise ValueError("state/control dims must be positive, disturbance dim nonnegative")
        if self.disturbance_box.dim != self.l:
            raise DimensionMismatch("disturbance box dimension != l")
        if self.control_set.dim != self.m:
            raise DimensionMismatch("control set dimension != m")


def eval_rhs(sys: ControlSystem, d: Sequence[float], x: Sequence[float], u: Sequence[float]) -> tuple:
    """Evaluate f(d, x, u) with full constraint validation. Pure."""
    if len(x) != sys.n:
        raise DimensionMismatch(f"state length {len(x)} != n = {sys.n}")
    if len(d) != sys.l:
        raise DimensionMismatch(f"disturbance length {len(d)} != l = {sys.l}")
    if len(u) != sys.m:
        raise DimensionMismatch(f"control length {len(u)} != m = {sys.m}")
    if not sys.disturbance_box.contains(d):
        raise DisturbanceOutOfBox(f"d = {tuple(d)} outside D")
    if not sys.control_set.contains(u):
        raise ControlOutOfSet(f"u = {tuple(u)} outside U")
    return tuple(float(v) for v in sys.rhs(tuple(d), tuple(x), tuple(u)))


# ---------------------------------------------------------------------------
# Disturbance signals
#
# Each signal exposes:
#   value(t)              clamped sample, right-continuous at mesh points
#   breakpoints(t0, t1)   discontinuity times strictly inside (t0, t1)
#   window_coeffs(t0, t1) per-axis (c0, c1, c2) of the clipped-sinusoid
#                         encoding c0 + c1*sin(c2*t) valid on breakpoint-free
#                         [t0, t1); the integration kernels clamp to D.
# ---------------------------------------------------------------------------


class DisturbanceSignal:
    box: Box

    def value(self, t: float) -> tuple:
        raise NotImplementedError

    def breakpoints(self, t0: float, t1: float) -> list:
        return []

    def window_coeffs(self, t0: float, t1: float):
        raise NotImplementedError

    def needs_clamping(self) -> bool:
        return False


def _clip_axis(raw: float, lo: float, hi: float) -> float:
    if raw < lo:
        raw = lo
    if raw > hi:
        raw = hi
    return raw


@dataclass(frozen=True)
class ConstantDisturbance(DisturbanceSignal):
    box: Box
    value_vec: tuple

    def __post_init__(self):
        if len(self.value_vec) != self.box.dim:
            raise DimensionMismatch("constant disturbance length != l")

    def value(self, t: float) -> tuple:
        return self.box.clip(self.value_vec)

    def window_coeffs(self, t0, t1):
        c0 = self.box.clip(self.value_vec)
        zero = (0.0,) * self.box.dim
        return c0, zero, zero

    def needs_clamping(self) -> bool:
        return not self.box.contains(self.value_vec)


@dataclass(frozen=True)
class SinusoidalDisturbance(DisturbanceSignal):
    """base vector with one axis replaced by offset + amplitude*sin(frequency*t)."""

    box: Box
    axis: int
    amplitude: float
    frequency: float
    offset: float = 0.0
    base: tuple = ()

    def __post_init__(self):
        base = self.base if self.base else (0.0,) * self.box.dim
        if len(base) != self.box.dim:
            raise DimensionMismatch("base length != l")
        if not 0 <= self.axis < self.box.dim:
            raise DimensionMismatch(f"axis {self.axis} out of range for l = {self.box.dim}")
        object.__setattr__(self, "base", tuple(float(v) for v in base))

    def value(self, t: float) -> tuple:
        out = []
        for i in range(self.box.dim):
            if i == self.axis:
                raw = self.offset + self.amplitude * math.sin(self.frequency * t)
            else:
                raw = self.base[i]
            out.append(_clip_axis(raw, self.box.lo[i], self.box.hi[i]))
        return tuple(out)

    def window_coeffs(self, t0, t1):
        c0 = list(self.base)
        c1 = [0.0] * self.box.dim
        c2 = [0.0] * self.box.dim
        c0[self.axis] = self.offset
        c1[self.axis] = self.amplitude
        c2[self.axis] = self.frequency
        return tuple(c0), tuple(c1), tuple(c2)

    def needs_clamping(self) -> bool:
        lo, hi = self.box.lo[self.axis], self.box.hi[self.axis]
        if not (lo <= self.offset - abs(self.amplitude) and self.offset + abs(self.amplitude) <= hi):
            return True
        return not all(
            self.box.lo[i] <= self.base[i] <= self.box.hi[i]
            for i in range(self.box.dim)
            if i != self.axis
        )


@dataclass(frozen=True)
class PiecewiseConstantRandomDisturbance(DisturbanceSignal):
    """Seeded piecewise-constant vector, value held on each [k*mesh, (k+1)*mesh).

    Values are drawn per (seed, axis, cell) by a counter-based hash, so
    sampling is O(1), order-independent, and replays bit-identically.
    """

    box: Box
    mesh: float
    seed: int
    low: tuple = ()
    high: tuple = ()

    def __post_init__(self):
        if self.mesh <= 0.0:
            raise ValueError("mesh must be positive")
        low = self.low if self.low else self.box.lo
        high = self.high if self.high else self.box.hi
        if len(low) != self.box.dim or len(high) != self.box.dim:
            raise DimensionMismatch("per-axis range length != l")
        # ranges are clipped into D so emitted values always lie in D
        lo = tuple(max(a, b) for a, b in zip(low, self.box.lo))
        hi = tuple(min(a, b) for a, b in zip(high, self.box.hi))
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b) and a <= b):
                raise ValueError("piecewise-constant range must be finite and nonempty within D")
        object.__setattr__(self, "low", lo)
        object.__setattr__(self, "high", hi)

    def _cell(self, t: float) -> int:
        idx = int(math.floor(t / self.mesh))
        if (idx + 1) * self.mesh <= t:
            idx += 1
        return idx

    def _axis_value(self, axis: int, cell: int) -> float:
        unit = hash_unit(self.seed, axis, cell)
        return self.low[axis] + (self.high[axis] - self.low[axis]) * unit

    def value(self, t: float) -> tuple:
        cell = self._cell(t)
        return tuple(self._axis_value(i, cell) for i in range(self.box.dim))

    def breakpoints(self, t0: float, t1: float) -> list:
        out = []
        k = self._cell(t0) + 1
        while True:
            tb = k * self.mesh
            if tb >= t1:
                break
            if tb > t0:
                out.append(tb)
            k += 1
        return out

    def window_coeffs(self, t0, t1):
        c0 = self.value(t0)
        zero = (0.0,) * self.box.dim
        return c0, zero, zero


@dataclass(frozen=True)
class TabulatedDisturbance(DisturbanceSignal):
    """Right-continuous hold of tabulated values; clamped to D."""

    box: Box
    times: tuple
    values: tuple  # tuple of vectors

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times/values must be nonempty and equal length")
        if any(t1 <= t0 for t0, t1 in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        vals = tuple(tuple(float(x) for x in v) for v in self.values)
        for v in vals:
            if len(v) != self.box.dim:
                raise DimensionMismatch("tabulated value length != l")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", vals)

    def _index(self, t: float) -> int:
        idx = 0
        for i, ti in enumerate(self.times):
            if ti <= t:
                idx = i
            else:
                break
        return idx

    def value(self, t: float) -> tuple:
        return self.box.clip(self.values[self._index(t)])

    def breakpoints(self, t0, t1):
        return [t for t in self.times if t0 < t < t1]

    def window_coeffs(self, t0, t1):
        c0 = self.value(t0)
        zero = (0.0,) * self.box.dim
        return c0, zero, zero

    def needs_clamping(self) -> bool:
        return any(not self.box.contains(v) for v in self.values)


def sample_disturbance(sig: DisturbanceSignal, t: float) -> tuple:
    """Sample a disturbance signal; the result always lies in D."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    return sig.value(t)


# ---------------------------------------------------------------------------
# Schedule perturbations (the nonnegative d-tilde in the sampling recursion)
# ---------------------------------------------------------------------------


class SchedulePerturbation:
    def value(self, t: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroPerturbation(SchedulePerturbation):
    def value(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantPerturbation(SchedulePerturbation):
    level: float

    def __post_init__(self):
        if self.level < 0.0:
            raise ValueError("schedule perturbation must be nonnegative")

    def value(self, t: float) -> float:
        return self.level


@dataclass(frozen=True)
class SinusoidalAbsPerturbation(SchedulePerturbation):
    """d_tilde(t) = |sin(t)|."""

    def value(self, t: float) -> float:
        return abs(math.sin(t))


@dataclass(frozen=True)
class TabulatedPerturbation(SchedulePerturbation):
    times: tuple
    levels: tuple

    def __post_init__(self):
        if len(self.times) != len(self.levels) or not self.times:
            raise ValueError("times/levels must be nonempty and equal length")
        if any(t1 <= t0 for t0, t1 in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def value(self, t: float) -> float:
        lvl = self.levels[0]
        for ti, vi in zip(self.times, self.levels):
            if ti <= t:
                lvl = vi
            else:
                break
        return lvl if lvl > 0.0 else 0.0


# ---------------------------------------------------------------------------
# Hypothesis estimators (report-only diagnostics, never silently assumed)
# ---------------------------------------------------------------------------


def estimate_growth_envelope(sys: ControlSystem, state_radius: float, control_radius: float,
                             samples: int = 2000, seed: int = 0) -> dict:
    """Fit |f(d,x,u)| <= beta*(1+s)*exp(kappa*s), s = |x|+|u|, over a sampled box.

    Report-only check of the growth hypothesis; returns the fitted envelope
    parameters and the worst observed ratio.
    """
    rng = derive_rng(seed, 0x48325)
    pts = []
    for _ in range(samples):
        x = tuple(rng.uniform(-state_radius, state_radius, sys.n))
        u = sys.control_set.clip(tuple(rng.uniform(-control_radius, control_radius, sys.m)))
        d = tuple(rng.uniform(lo, hi) for lo, hi in zip(sys.disturbance_box.lo, sys.disturbance_box.hi)) if sys.l else ()
        fx = sys.rhs(d, x, u)
        s = math.sqrt(sum(v * v for v in x)) + math.sqrt(sum(v * v for v in u))
        pts.append((s, math.sqrt(sum(v * v for v in fx))))
    best = None
    for kappa in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0):
        beta = max(f / ((1.0 + s) * math.exp(kappa * s)) for s, f in pts)
        if best is None or beta * math.exp(kappa) < best[1] * math.exp(best[0]):
            best = (kappa, beta)
    kappa, beta = best
    return {
        "kappa": kappa,
        "beta": beta,
        "samples": samples,
        "state_radius": state_radius,
        "control_radius": control_radius,
        "worst_ratio": max(f / ((1.0 + s) * math.exp(kappa * s)) for s, f in pts),
    }


def estimate_one_sided_lipschitz(sys: ControlSystem, state_radius: float, control_radius: float,
                                 pairs: int = 2000, seed: int = 0) -> dict:
    """Largest observed (x-y).(f(d,x,u)-f(d,y,u))/|x-y|^2 over sampled pairs.

    This estimates the one-sided Lipschitz constant on the sampled box; it is
    a report-only diagnostic, not a certificate.
    """
    rng = derive_rng(seed, 0x48331)
    worst = -math.inf
    arg = None
    for _ in range(pairs):
        x = tuple(rng.uniform(-state_radius, state_radius, sys.n))
        y = tuple(rng.uniform(-state_radius, state_radius, sys.n))
        if all(a == b for a, b in zip(x, y)):
            continue
        u = sys.control_set.clip(tuple(rng.uniform(-control_radius, control_radius, sys.m)))
        d = tuple(rng.uniform(lo, hi) for lo, hi in zip(sys.disturbance_box.lo, sys.disturbance_box.hi)) if sys.l else ()
        fx = sys.rhs(d, x, u)
        fy = sys.rhs(d, y, u)
        num = sum((a - b) * (fa - fb) for a, b, fa, fb in zip(x, y, fx, fy))
        den = sum((a - b) ** 2 for a, b in zip(x, y))
        q = num / den
        if q > worst:
            worst, arg = q, (x, y, u, d)
    return {"largest_quotient": worst, "pairs": pairs, "witness": arg,
            "state_radius": state_radius, "control_radius": control_radius}
