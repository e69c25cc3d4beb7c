"""Numerical certification: decrease grid checks, reachability bound
construction, the maximum-sampling-period formula, and empirical checks.

All grid verdicts are "pass on this grid with this margin" and carry the
grid resolution and truncation radius; none of them is a formal proof.
Suprema over unbounded sets are checked only within the declared
truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._rng import derive_rng
from .dynamics import Box, ConstantDisturbance, ControlSystem, PiecewiseConstantRandomDisturbance
from .integrate import DEFAULT_CONFIG, FiniteEscape, IntegratorConfig, first_hitting_time, integrate_held
from .setchain import Region, sample_region

MARGIN_TOL = 1e-9
TIME_TOL = 1e-6


class EmptyGrid(ValueError):
    """No grid node satisfied the sweep's membership filter."""


class InversionFailure(ArithmeticError):
    """a1 could not be inverted on the required range."""


class NonpositiveGamma(ValueError):
    pass


class NonConvergence(RuntimeError):
    """Limit-set estimate did not stabilize within the run horizon."""


# ---------------------------------------------------------------------------
# Lyapunov data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovData:
    """Scalar function with gradient; optional vectorized forms for sweeps."""

    V: Callable
    grad: Callable
    label: str = ""
    V_batch: Optional[Callable] = None      # (N, n) -> (N,)
    grad_batch: Optional[Callable] = None   # (N, n) -> (N, n)

    def gradient_consistency(self, probes: Sequence, step: float = 1e-6) -> float:
        """Worst deviation of central differences from grad over probes.

        The advertised invariant is deviation <= max(1e-6, 1e-4 * |grad|)
        per probe; the caller asserts against the returned worst ratio.
        """
        worst = 0.0
        for x in probes:
            g = np.asarray(self.grad(tuple(x)), dtype=float)
            fd = np.empty_like(g)
            for i in range(g.size):
                xp = list(x)
                xm = list(x)
                xp[i] += step
                xm[i] -= step
                fd[i] = (self.V(tuple(xp)) - self.V(tuple(xm))) / (2.0 * step)
            tol = max(1e-6, 1e-4 * float(np.linalg.norm(g)))
            dev = float(np.max(np.abs(fd - g))) / tol
            worst = max(worst, dev)
        return worst


# ---------------------------------------------------------------------------
# Grid specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    state_nodes: tuple
    truncation: Box
    disturbance_nodes: tuple = ()

    def state_grid(self) -> list:
        axes = [np.linspace(lo, hi, k) for lo, hi, k in
                zip(self.truncation.lo, self.truncation.hi, self.state_nodes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return [tuple(float(m[idx]) for m in mesh) for idx in np.ndindex(mesh[0].shape)]

    def disturbance_grid(self, box: Box) -> list:
        if box.dim == 0:
            return [()]
        nodes = self.disturbance_nodes or (3,) * box.dim
        axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(box.lo, box.hi, nodes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return [tuple(float(m[idx]) for m in mesh) for idx in np.ndindex(mesh[0].shape)]


# ---------------------------------------------------------------------------
# Decrease certification (grid form of the dissipation inequality)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecreaseResult:
    passed: bool
    worst_value: float        # max over the grid of sup_d grad V . f(d, x, v)
    delta: float
    margin_tol: float
    maximizer_x: tuple
    maximizer_d: tuple
    state_nodes_checked: int
    truncation: Box
    grid: GridSpec

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_value": self.worst_value,
            "delta": self.delta,
            "margin_tol": self.margin_tol,
            "maximizer_x": list(self.maximizer_x),
            "maximizer_d": list(self.maximizer_d),
            "state_nodes_checked": self.state_nodes_checked,
            "truncation_lo": list(self.truncation.lo),
            "truncation_hi": list(self.truncation.hi),
            "state_nodes": list(self.grid.state_nodes),
            "disturbance_nodes": list(self.grid.disturbance_nodes),
        }


def certify_decrease(sys: ControlSystem, omega: Region, lyap: LyapunovData,
                     v: Sequence[float], R: float, delta: float, grid: GridSpec,
                     margin_tol: float = MARGIN_TOL) -> DecreaseResult:
    """Check sup_d grad V(x) . f(d, x, v) <= -delta on {x in Omega : V >= R}.

    Evaluated on the grid within the truncation box; passes iff the maximum
    stays below -delta + margin_tol. The maximizer is reported either way.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    v = tuple(float(c) for c in v)
    nodes = [x for x in grid.state_grid() if omega.contains(x) and lyap.V(x) >= R]
    if not nodes:
        raise EmptyGrid("no grid node lies in Omega with V >= R inside the truncation")
    d_nodes = grid.disturbance_grid(sys.disturbance_box)
    rhs = sys.rhs
    grad = lyap.grad
    worst = -math.inf
    arg_x = nodes[0]
    arg_d = d_nodes[0]
    for x in nodes:
        g = grad(x)
        for d in d_nodes:
            f = rhs(d, x, v)
            val = 0.0
            for gi, fi in zip(g, f):
                val += gi * fi
            if val > worst:
                worst = val
                arg_x, arg_d = x, d
    return DecreaseResult(
        passed=worst <= -delta + margin_tol,
        worst_value=worst,
        delta=delta,
        margin_tol=margin_tol,
        maximizer_x=arg_x,
        maximizer_d=arg_d,
        state_nodes_checked=len(nodes),
        truncation=grid.truncation,
        grid=grid,
    )


# ---------------------------------------------------------------------------
# Reachability certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReachabilityCertificate:
    """(v, c, b, a, T) data for constant-control reachability.

    b and a are tabulated nondecreasing envelopes with b(0) = a(0) = 0
    (linear interpolation between radius-grid nodes); T_bound maps an
    initial state to the hitting-time bound.
    """

    control: tuple
    dwell: float
    c: float
    radii: np.ndarray
    b_table: np.ndarray
    a_table: np.ndarray
    T_bound: Optional[Callable] = None
    source: Optional[Region] = None
    target: Optional[Region] = None
    meta: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.c < 0.0:
            raise ValueError("c must be nonnegative")
        if self.dwell <= 0.0:
            raise ValueError("dwell r must be positive")
        for name, tab in (("b", self.b_table), ("a", self.a_table)):
            if tab.shape != self.radii.shape:
                raise ValueError(f"{name} table length mismatch")
            if tab[0] != 0.0:
                raise ValueError(f"{name}(0) must be 0")
            if np.any(tab[1:] < tab[:-1]):  # elementwise, +inf-safe
                raise ValueError(f"{name} table must be nondecreasing")

    def _interp(self, table: np.ndarray, s: float) -> float:
        if s < 0.0:
            raise ValueError("radius must be nonnegative")
        if s > float(self.radii[-1]) * (1.0 + 1e-12):
            raise ValueError(f"radius {s} beyond tabulated range {self.radii[-1]}")
        i = int(np.searchsorted(self.radii, s, side="right")) - 1
        if i >= self.radii.size - 1:
            return float(table[-1])
        lo, hi = float(table[i]), float(table[i + 1])
        if s == self.radii[i]:
            return lo
        if not math.isfinite(hi):
            # envelope saturated to +inf past the double-precision range
            return math.inf
        w = (s - float(self.radii[i])) / (float(self.radii[i + 1]) - float(self.radii[i]))
        return lo + w * (hi - lo)

    def b(self, s: float) -> float:
        return self._interp(self.b_table, s)

    def a(self, s: float) -> float:
        return self._interp(self.a_table, s)

    def time_bound(self, x0) -> float:
        if self.T_bound is not None:
            return float(self.T_bound(tuple(x0)))
        return self.c + self.b(float(np.linalg.norm(x0)))

    @classmethod
    def from_functions(cls, c: float, b_fn: Callable, a_fn: Callable, radii,
                       control, dwell: float, **kw) -> "ReachabilityCertificate":
        """Tabulate callable envelopes; monotonicity is forced by running max
        and double-precision overflow saturates to +inf."""

        def safe(fn, s):
            try:
                return float(fn(float(s)))
            except OverflowError:
                return math.inf

        radii = np.asarray(radii, dtype=float)
        if radii[0] != 0.0:
            radii = np.concatenate(([0.0], radii))
        b_tab = np.maximum.accumulate(np.maximum([safe(b_fn, s) for s in radii], 0.0))
        a_tab = np.maximum.accumulate(np.maximum([safe(a_fn, s) for s in radii], 0.0))
        b_tab[0] = 0.0
        a_tab[0] = 0.0
        return cls(control=tuple(control), dwell=dwell, c=c, radii=radii,
                   b_table=b_tab, a_table=a_tab, **kw)


def _unit_directions(dim: int, count: int, seed: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = derive_rng(seed, 0xD14)
    g = rng.normal(size=(count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _invert_increasing(fn: Callable, target: float, hi0: float = 1.0) -> float:
    """Invert a strictly increasing fn with fn(0) = 0 at target >= 0."""
    if target <= 0.0:
        return 0.0
    cap = 1e308
    hi = hi0
    while fn(hi) < target:
        if hi >= cap:
            raise InversionFailure(f"a1 never reaches {target}")
        hi = min(hi * 4.0, cap)
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lemma_2_7_bounds(lyap: LyapunovData, R: float, delta: float, p: float,
                     a1: Callable, a2: Callable, r: float, radius_grid,
                     dim: int, directions: int = 720, seed: int = 0,
                     control=None, source: Optional[Region] = None,
                     target: Optional[Region] = None, notes: str = "") -> ReachabilityCertificate:
    """Build the explicit reachability bounds from a certified decrease.

    c  = max(0, V(0) - R) / delta
    b(s) = (max_{|x| <= s} max(0, V(x) - R) - max(0, V(0) - R)) / delta
    a(s) = a1^{-1}(exp(p (c + r) + p b(s)) * a2(s))

    The ball maximum is a sphere grid search accumulated over the radius
    grid (resolution recorded in meta); a1 is inverted numerically.
    """
    if delta <= 0.0 or r <= 0.0 or p <= 0.0:
        raise ValueError("delta, r and p must be positive")
    radii = np.asarray(radius_grid, dtype=float)
    if radii[0] != 0.0:
        radii = np.concatenate(([0.0], radii))
    dirs = _unit_directions(dim, directions, seed)
    origin = (0.0,) * dim
    v0 = max(0.0, lyap.V(origin) - R)
    c = v0 / delta

    running = v0
    b_tab = np.empty(radii.size)
    b_tab[0] = 0.0
    for i, s in enumerate(radii):
        if i == 0:
            continue
        pts = dirs * s
        if lyap.V_batch is not None:
            vals = np.asarray(lyap.V_batch(pts), dtype=float)
            m = float(vals.max())
        else:
            m = max(lyap.V(tuple(pt)) for pt in pts)
        running = max(running, max(0.0, m - R))
        b_tab[i] = (running - v0) / delta
    b_tab = np.maximum.accumulate(b_tab)

    # the envelope saturates to +inf where exp(p(c+r) + p b(s)) * a2(s)
    # exceeds double range; an infinite bound is still a valid envelope
    a_tab = np.empty(radii.size)
    for i, s in enumerate(radii):
        try:
            arg = math.exp(p * (c + r) + p * b_tab[i]) * a2(float(s))
        except OverflowError:
            arg = math.inf
        a_tab[i] = math.inf if not math.isfinite(arg) else _invert_increasing(a1, arg)
    a_tab = np.maximum.accumulate(a_tab)
    a_tab[0] = 0.0

    V = lyap.V

    def t_bound(x0):
        return max(0.0, V(tuple(x0)) - R) / delta

    return ReachabilityCertificate(
        control=tuple(control) if control is not None else (),
        dwell=r,
        c=c,
        radii=radii,
        b_table=b_tab,
        a_table=a_tab,
        T_bound=t_bound,
        source=source,
        target=target,
        meta={"R": R, "delta": delta, "p": p, "directions": int(dirs.shape[0]),
              "radius_step": float(radii[1] - radii[0]) if radii.size > 1 else 0.0},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Empirical property (Q) check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyQResult:
    trials: int
    violations: tuple
    worst_T: float
    worst_sup: float
    seed: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "violations": [dict(v) for v in self.violations],
            "worst_T": self.worst_T,
            "worst_sup": self.worst_sup,
            "seed": self.seed,
        }


def check_property_Q(sys: ControlSystem, omega: Region, target: Region,
                     v: Sequence[float], r: float, cert: ReachabilityCertificate,
                     trials: int, seed: int, truncation: Optional[Box] = None,
                     cfg: IntegratorConfig = DEFAULT_CONFIG, d_mesh: float = 0.1,
                     time_tol: float = TIME_TOL) -> PropertyQResult:
    """Monte-Carlo check of the reachability property against the bounds.

    Per trial: draw x0 in Omega (within the truncation box) and a random
    piecewise-constant disturbance, integrate with u = v up to
    T_bound(x0) + r, then verify hitting time, norm envelope, target dwell
    and source membership. All violations are reported with their trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v = tuple(float(ci) for ci in v)
    box = truncation or omega.bounding
    if box is None:
        raise ValueError("Omega has no bounding box; supply a truncation")
    violations = []
    worst_T = 0.0
    worst_sup = 0.0
    for trial in range(trials):
        rng = derive_rng(seed, 0x5150, trial)
        x0 = sample_region(omega, rng, 1, box)[0]
        if sys.l > 0:
            d_sig = PiecewiseConstantRandomDisturbance(
                box=sys.disturbance_box, mesh=d_mesh, seed=int(rng.integers(0, 2**62)))
        else:
            d_sig = ConstantDisturbance(box=sys.disturbance_box, value_vec=())
        s0 = float(np.linalg.norm(x0))
        t_bound = cert.time_bound(x0)
        horizon = t_bound + r
        try:
            seg = integrate_held(sys, d_sig, x0, v, 0.0, horizon, cfg)
        except FiniteEscape as esc:
            violations.append({"trial": trial, "kind": "finite_escape",
                               "escape_time": esc.escape_time, "x0": list(x0)})
            continue
        a_bound = cert.a(s0)
        t_hit = first_hitting_time(seg, target)
        if t_hit is None:
            violations.append({"trial": trial, "kind": "never_hit", "x0": list(x0),
                               "bound": cert.c + cert.b(s0)})
            continue
        worst_T = max(worst_T, t_hit)
        if t_hit > cert.c + cert.b(s0) + time_tol:
            violations.append({"trial": trial, "kind": "hit_too_late", "T_hit": t_hit,
                               "bound": cert.c + cert.b(s0), "x0": list(x0)})
        norms = np.sqrt((seg.states * seg.states).sum(axis=1))
        dwell_end = min(t_hit + r, float(seg.times[-1]))
        mask_i = seg.times <= dwell_end
        sup_i = float(norms[mask_i].max())
        worst_sup = max(worst_sup, sup_i)
        if sup_i > a_bound + 1e-9:
            violations.append({"trial": trial, "kind": "norm_bound", "sup": sup_i,
                               "bound": a_bound, "x0": list(x0)})
        for idx in np.nonzero((seg.times >= t_hit) & (seg.times <= dwell_end))[0]:
            if not target.contains(tuple(seg.states[idx])):
                violations.append({"trial": trial, "kind": "left_target",
                                   "t": float(seg.times[idx]), "x0": list(x0)})
                break
        for idx in np.nonzero(seg.times <= t_hit)[0]:
            if not omega.contains(tuple(seg.states[idx])):
                violations.append({"trial": trial, "kind": "left_source",
                                   "t": float(seg.times[idx]), "x0": list(x0)})
                break
    return PropertyQResult(trials=trials, violations=tuple(violations),
                           worst_T=worst_T, worst_sup=worst_sup, seed=seed)


# ---------------------------------------------------------------------------
# Maximum sampling period (emulation feedback bound)
# ---------------------------------------------------------------------------


def max_sampling_period(L: float, gamma: float, M: float) -> float:
    """Right-hand side of the admissible-sampling-period bound.

    L > 0:  (1/(2L)) * ln(1 + (L/gamma) * (1/(1+M))^2)
    L = 0:  (1/(2 gamma)) * (1/(1+M))^2

    The caller picks any h_tilde strictly below the returned value. log1p
    keeps the L -> 0+ limit accurate to roundoff.
    """
    if gamma <= 0.0:
        raise NonpositiveGamma(f"gamma = {gamma} must be positive")
    if L < 0.0 or M < 0.0:
        raise ValueError("L and M must be nonnegative")
    q = 1.0 / (1.0 + M)
    if L == 0.0:
        return q * q / (2.0 * gamma)
    return math.log1p((L / gamma) * (q * q)) / (2.0 * L)


@dataclass(frozen=True)
class SamplingBound:
    L: float
    gamma: float
    M: float
    bound: float
    h_tilde: float
    R: Optional[float] = None
    rho: Optional[Callable] = None

    def __post_init__(self):
        if not 0.0 < self.h_tilde < self.bound:
            raise ValueError("h_tilde must be positive and strictly below the bound")

    def to_dict(self) -> dict:
        return {"L": self.L, "gamma": self.gamma, "M": self.M, "R": self.R,
                "bound": self.bound, "h_tilde": self.h_tilde}


def make_sampling_bound(L: float, gamma: float, M: float, R: Optional[float] = None,
                        rho: Optional[Callable] = None, fraction: float = 0.999) -> SamplingBound:
    bound = max_sampling_period(L, gamma, M)
    return SamplingBound(L=L, gamma=gamma, M=M, bound=bound,
                         h_tilde=fraction * bound, R=R, rho=rho)


# ---------------------------------------------------------------------------
# Inequality grid checks for the emulation feedback
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityResult:
    passed_growth: bool       # (z-x).f(d,z,k(x)) <= L|z-x|^2 + gamma|x|^2
    passed_decrease: bool     # grad V(z).f(d,z,k(x)) <= -rho(V(z)) on M|z-x| <= |z|
    worst_growth: float
    worst_decrease: float
    witness_growth: tuple     # (z, x, d)
    witness_decrease: tuple
    pairs_growth: int
    pairs_decrease: int
    nodes_in_theta: int
    margin_tol: float

    @property
    def passed(self) -> bool:
        return self.passed_growth and self.passed_decrease

    def to_dict(self) -> dict:
        wg = self.witness_growth
        wd = self.witness_decrease
        return {
            "passed_growth": self.passed_growth,
            "passed_decrease": self.passed_decrease,
            "worst_growth_margin": self.worst_growth,
            "worst_decrease_margin": self.worst_decrease,
            "witness_growth": {"z": list(wg[0]), "x": list(wg[1]), "d": list(wg[2])} if wg else None,
            "witness_decrease": {"z": list(wd[0]), "x": list(wd[1]), "d": list(wd[2])} if wd else None,
            "pairs_growth": self.pairs_growth,
            "pairs_decrease": self.pairs_decrease,
            "nodes_in_theta": self.nodes_in_theta,
            "margin_tol": self.margin_tol,
        }


def check_3_3_3_4(sys: ControlSystem, k_inner: Callable, lyap: LyapunovData,
                  theta: Region, L: float, gamma: float, M: float, rho: Callable,
                  grid: GridSpec, margin_tol: float = MARGIN_TOL) -> InequalityResult:
    """Grid check of the two emulation-feedback inequalities over Theta.

    Both (z, x) range over the grid nodes inside Theta; d over the
    disturbance grid. The decrease inequality is only quantified over pairs
    with M |z - x| <= |z| (with a huge M that essentially means z = x).
    """
    nodes = [x for x in grid.state_grid() if theta.contains(x)]
    if not nodes:
        raise EmptyGrid("no grid node lies inside Theta")
    d_nodes = grid.disturbance_grid(sys.disturbance_box)
    rhs = sys.rhs
    grad = lyap.grad
    V = lyap.V

    norms2 = [sum(c * c for c in z) for z in nodes]
    vz = [V(z) for z in nodes]
    gz = [grad(z) for z in nodes]

    worst_g = -math.inf
    worst_d = -math.inf
    wit_g = None
    wit_d = None
    pairs_g = 0
    pairs_d = 0
    for xi, x in enumerate(nodes):
        u = tuple(k_inner(x))
        gx2 = gamma * norms2[xi]
        for d in d_nodes:
            for zi, z in enumerate(nodes):
                f = rhs(d, z, u)
                dz2 = 0.0
                lhs = 0.0
                for za, xa, fa in zip(z, x, f):
                    e = za - xa
                    dz2 += e * e
                    lhs += e * fa
                m_g = lhs - L * dz2 - gx2
                pairs_g += 1
                if m_g > worst_g:
                    worst_g = m_g
                    wit_g = (z, x, d)
                if M * M * dz2 <= norms2[zi]:
                    gv = 0.0
                    for ga, fa in zip(gz[zi], f):
                        gv += ga * fa
                    m_d = gv + rho(vz[zi])
                    pairs_d += 1
                    if m_d > worst_d:
                        worst_d = m_d
                        wit_d = (z, x, d)
    return InequalityResult(
        passed_growth=worst_g <= margin_tol,
        passed_decrease=worst_d <= margin_tol,
        worst_growth=worst_g,
        worst_decrease=worst_d,
        witness_growth=wit_g,
        witness_decrease=wit_d,
        pairs_growth=pairs_g,
        pairs_decrease=pairs_d,
        nodes_in_theta=len(nodes),
        margin_tol=margin_tol,
    )


# ---------------------------------------------------------------------------
# Empirical attractor reach (disturbance-free systems)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttractorReachResult:
    eps: float
    radius_levels: tuple
    T_values: tuple           # nondecreasing in the radius level
    verdict: bool
    attractor_points: np.ndarray
    trials_per_level: int
    horizon: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "radius_levels": list(self.radius_levels),
            "T_values": list(self.T_values),
            "verdict": self.verdict,
            "attractor_point_count": int(self.attractor_points.shape[0]),
            "trials_per_level": self.trials_per_level,
            "horizon": self.horizon,
            "seed": self.seed,
        }


def estimate_attractor_reach(sys: ControlSystem, v: Sequence[float], eps: float, r: float,
                             radius_levels: Sequence[float], trials: int, seed: int,
                             cfg: IntegratorConfig = DEFAULT_CONFIG,
                             frozen_disturbance=None, probe_count: int = 16,
                             horizon: float = 60.0, conv_tol: float = 1e-4) -> AttractorReachResult:
    """Estimate the attractor under u = v and the time to reach its
    eps-neighborhood per initial-radius level, empirically.

    The attractor is the set of long-run endpoints from a probe grid;
    NonConvergence is raised when those endpoints are still drifting over
    the last quarter of the horizon.
    """
    if sys.l > 0 and frozen_disturbance is None:
        raise ValueError("system has a disturbance channel; pass frozen_disturbance")
    if eps <= 0.0 or r <= 0.0:
        raise ValueError("eps and r must be positive")
    d_sig = frozen_disturbance or ConstantDisturbance(box=sys.disturbance_box, value_vec=())
    v = tuple(float(c) for c in v)
    levels = sorted(float(s) for s in radius_levels)
    rmax = max(levels)

    probes = _unit_directions(sys.n, probe_count, seed) * rmax
    endpoints = []
    for x0 in probes:
        seg = integrate_held(sys, d_sig, tuple(x0), v, 0.0, horizon, cfg)
        tail = seg.state_at(horizon * 0.75)
        end = seg.end_state
        drift = math.sqrt(sum((a - b) ** 2 for a, b in zip(end, tail)))
        if drift > conv_tol * (1.0 + math.sqrt(sum(a * a for a in end))):
            raise NonConvergence(
                f"probe endpoint still drifting by {drift} over the last quarter of the horizon")
        endpoints.append(end)
    attractor = np.asarray(endpoints)

    def dists(states: np.ndarray) -> np.ndarray:
        diff = states[:, None, :] - attractor[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2)).min(axis=1)

    T_values = []
    verdict = True
    running_T = 0.0
    for li, s in enumerate(levels):
        for trial in range(trials):
            rng = derive_rng(seed, 0xA77, li, trial)
            direction = rng.normal(size=sys.n)
            direction /= np.linalg.norm(direction)
            x0 = tuple(direction * s * rng.uniform(0.0, 1.0) ** (1.0 / sys.n))
            seg = integrate_held(sys, d_sig, x0, v, 0.0, horizon, cfg)
            dd = dists(seg.states)
            outside = np.nonzero(dd >= eps)[0]
            if outside.size and outside[-1] == seg.times.size - 1:
                verdict = False  # never settled into the neighborhood
                last_exit = horizon
            else:
                last_exit = float(seg.times[outside[-1]]) if outside.size else 0.0
            running_T = max(running_T, last_exit)
        T_values.append(running_T)
    return AttractorReachResult(
        eps=eps, radius_levels=tuple(levels), T_values=tuple(T_values), verdict=verdict,
        attractor_points=attractor, trials_per_level=trials, horizon=horizon, seed=seed)
