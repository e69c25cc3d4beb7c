"""Empirical closed-loop stability assessment and the set-descent check.

These suites refute (with a witness) or statistically support the three
stability ingredients: Lagrange boundedness, small-signal (Lyapunov)
boundedness, and uniform attractivity. Verdicts are Monte-Carlo evidence,
never proofs; trial counts and seeds are carried in the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_rng
from .dynamics import ConstantPerturbation, PiecewiseConstantRandomDisturbance, ConstantDisturbance
from .hybrid import TERMINATED_T_END, Trajectory, simulate_closed_loop
from .integrate import DEFAULT_CONFIG, IntegratorConfig

ENVELOPE_TOL = 1e-9
TIME_TOL = 1e-6


# ---------------------------------------------------------------------------
# Set-descent check (per-instant window verification along one trajectory)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DescentResult:
    violations: tuple
    checked_instants: int
    unresolved: int              # windows truncated by the horizon
    theta_entry_time: Optional[float]
    theta_entry_bound: float
    theta_reentries: int         # instants in Theta followed by a later outer instant

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "violations": [dict(v) for v in self.violations],
            "checked_instants": self.checked_instants,
            "unresolved": self.unresolved,
            "theta_entry_time": self.theta_entry_time,
            "theta_entry_bound": self.theta_entry_bound,
            "theta_reentries": self.theta_reentries,
        }


def _next_smaller(cells: np.ndarray) -> np.ndarray:
    """next_smaller[i] = smallest j > i with cells[j] < cells[i], else -1."""
    n = cells.size
    out = np.full(n, -1, dtype=np.int64)
    stack = []
    for j in range(n):
        cj = cells[j]
        while stack and cells[stack[-1]] > cj:
            out[stack.pop()] = j
        stack.append(j)
    return out


def _compose_envelope(a_fn, times: int, s: float) -> float:
    v = s
    for _ in range(times):
        try:
            v = a_fn(v)
        except (OverflowError, ValueError):
            return math.inf
        if not math.isfinite(v) or v > 1e300:
            return math.inf
    return v


def check_set_descent(traj: Trajectory, chain, certs: dict,
                      time_tol: float = TIME_TOL) -> DescentResult:
    """Verify the descent property along a simulated trajectory.

    For every sampling instant with cell index k > 1: some later sampling
    instant within c_k + b_k(|x(tau_i)|) + r_k must carry a strictly smaller
    index, with |x(t)| <= a_k(|x(tau_i)|) in between. Entry into Theta must
    occur by N*(c + b(a^(N)(|x0|)) + r) with the level maxima (reported as
    +inf when the composed envelope leaves double range). Windows cut off
    by the horizon are counted as unresolved, not as violations.
    """
    cells = traj.cell_indices
    instants = traj.instants
    norms = traj.norms()
    inst_norms = norms[traj.seg_starts]
    # per-interval max of the dense norm rows (interval i owns rows
    # seg_starts[i] .. seg_starts[i+1]-1, the last interval owns the tail)
    interval_max = np.maximum.reduceat(norms, traj.seg_starts)
    nxt = _next_smaller(cells)
    horizon = float(traj.times[-1])

    levels = sorted(k for k in certs if isinstance(k, int))
    if not levels:
        raise ValueError("need at least one per-level certificate")

    violations = []
    unresolved = 0
    checked = 0
    for i in range(cells.size):
        k = int(cells[i])
        if k <= 1:
            continue
        cert = certs.get(k)
        if cert is None:
            raise KeyError(f"no certificate for chain level {k}")
        checked += 1
        s = float(inst_norms[i])
        try:
            window = cert.c + cert.b(s) + cert.dwell
        except ValueError:
            window = math.inf
        j = int(nxt[i])
        if j < 0:
            if horizon - instants[i] < window - time_tol:
                unresolved += 1
            else:
                violations.append({"kind": "no_descent", "instant_index": i,
                                   "t": float(instants[i]), "cell": k,
                                   "window": window})
            continue
        elapsed = float(instants[j] - instants[i])
        if elapsed > window + time_tol:
            violations.append({"kind": "descent_too_late", "instant_index": i,
                               "t": float(instants[i]), "cell": k,
                               "descent_t": float(instants[j]),
                               "elapsed": elapsed, "window": window})
        try:
            a_bound = cert.a(s)
        except ValueError:
            a_bound = math.inf
        seg_max = float(interval_max[i:j].max()) if j > i else 0.0
        seg_max = max(seg_max, float(inst_norms[j]))
        if seg_max > a_bound * (1.0 + 1e-12) + 1e-9:
            violations.append({"kind": "norm_bound", "instant_index": i,
                               "t": float(instants[i]), "cell": k,
                               "sup": seg_max, "bound": a_bound})

    # Theta entry bound with the level maxima
    in_theta = np.nonzero(cells == 1)[0]
    entry_time = float(instants[in_theta[0]]) if in_theta.size else None
    n_levels = int(cells.max()) if cells.size else 1
    c_max = max(certs[k].c for k in levels)
    r_max = max(certs[k].dwell for k in levels)

    def a_max(s):
        vals = []
        for k in levels:
            try:
                vals.append(certs[k].a(s))
            except ValueError:
                vals.append(math.inf)
        return max(vals)

    def b_max(s):
        vals = []
        for k in levels:
            try:
                vals.append(certs[k].b(s))
            except ValueError:
                vals.append(math.inf)
        return max(vals)

    s0 = float(norms[0])
    aN = _compose_envelope(a_max, n_levels, s0)
    entry_bound = math.inf if not math.isfinite(aN) else n_levels * (c_max + b_max(aN) + r_max)
    if entry_time is None and horizon >= entry_bound - time_tol:
        violations.append({"kind": "no_theta_entry", "bound": entry_bound,
                           "horizon": horizon})
    elif entry_time is not None and entry_time > entry_bound + time_tol:
        violations.append({"kind": "theta_entry_late", "entry": entry_time,
                           "bound": entry_bound})

    reentries = 0
    if in_theta.size:
        reentries = int((cells[in_theta[0]:] != 1).sum())

    return DescentResult(
        violations=tuple(violations),
        checked_instants=checked,
        unresolved=unresolved,
        theta_entry_time=entry_time,
        theta_entry_bound=entry_bound,
        theta_reentries=reentries,
    )


# ---------------------------------------------------------------------------
# Stability suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    trials: int
    seed: int
    t_end: float
    radii: tuple
    delta_levels: tuple
    eps_levels: tuple
    lagrange_table: tuple          # per radius: sup |x(t)| over trials
    lyapunov_table: tuple          # per delta: sup |x(t)| over trials
    attractivity: dict             # eps -> tuple of settling times per radius
    verdicts: dict
    worst: dict
    descent_violations: int
    theta_entry_times: tuple
    envelope_tol: float

    @property
    def passed(self) -> bool:
        return all(v for v in self.verdicts.values() if v is not None) and \
            all(v is not False for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "t_end": self.t_end,
            "radii": list(self.radii),
            "delta_levels": list(self.delta_levels),
            "eps_levels": list(self.eps_levels),
            "lagrange_table": list(self.lagrange_table),
            "lyapunov_table": list(self.lyapunov_table),
            "attractivity": {str(k): list(v) for k, v in self.attractivity.items()},
            "verdicts": dict(self.verdicts),
            "worst": dict(self.worst),
            "descent_violations": self.descent_violations,
            "theta_entry_times": list(self.theta_entry_times),
            "envelope_tol": self.envelope_tol,
        }


def _sphere_point(rng: np.random.Generator, n: int, radius: float) -> tuple:
    g = rng.normal(size=n)
    g /= np.linalg.norm(g)
    return tuple(g * radius)


def run_stability_suite(sys, fb, radii: Sequence[float], eps_levels: Sequence[float],
                        delta_levels: Sequence[float], trials: int, t_end: float,
                        seed: int, cfg: IntegratorConfig = DEFAULT_CONFIG,
                        envelope_tol: float = ENVELOPE_TOL, certs: Optional[dict] = None,
                        d_mesh: float = 0.1, d_tilde_max: float = 1.0,
                        trial_runner=None) -> StabilityReport:
    """Monte-Carlo stability suite over spheres of the given radii.

    Initial states are drawn on each sphere, disturbances are seeded
    piecewise-constant signals in D, and each trial carries a random
    constant schedule perturbation in [0, d_tilde_max]. A trial settles
    into an eps-ball when its final recorded norm is inside; the settling
    time is the last exit time. Escape anywhere is a hard failure with a
    witness. When per-level certificates are supplied, every trajectory
    also runs the set-descent check.

    ``trial_runner`` (an Executor.map-like callable) lets the CLI spread
    trials over workers; results are reduced in trial order either way.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    radii = sorted(float(s) for s in radii)
    delta_levels = sorted(float(s) for s in delta_levels)
    eps_levels = sorted(float(e) for e in eps_levels)

    def run_one(args):
        kind, level_idx, radius, trial = args
        rng = derive_rng(seed, 0x57AB, kind, level_idx, trial)
        x0 = _sphere_point(rng, sys.n, radius)
        if sys.l > 0:
            d_sig = PiecewiseConstantRandomDisturbance(
                box=sys.disturbance_box, mesh=d_mesh,
                seed=int(rng.integers(0, 2**62)))
        else:
            d_sig = ConstantDisturbance(box=sys.disturbance_box, value_vec=())
        d_tilde = ConstantPerturbation(float(rng.uniform(0.0, d_tilde_max)))
        traj = simulate_closed_loop(sys, fb, x0, d_sig, d_tilde, t_end, cfg)
        sup = traj.sup_norm()
        final = float(traj.norms()[-1])
        settles = {}
        for epsv in eps_levels:
            if final <= epsv:
                last = traj.last_exit_time(epsv)
                settles[epsv] = 0.0 if last is None else last
            else:
                settles[epsv] = None
        descent = None
        entry = None
        if certs is not None:
            dres = check_set_descent(traj, fb.chain, certs)
            descent = len(dres.violations)
            entry = dres.theta_entry_time
        return {
            "kind": kind, "level_idx": level_idx, "radius": radius, "trial": trial,
            "sup": sup, "final": final, "settles": settles,
            "termination": traj.termination, "escape_time": traj.escape_time,
            "descent_violations": descent, "theta_entry": entry,
        }

    jobs = []
    for li, s in enumerate(radii):
        jobs += [(0, li, s, k) for k in range(trials)]
    for li, dlt in enumerate(delta_levels):
        jobs += [(1, li, dlt, k) for k in range(trials)]

    runner = trial_runner or map
    results = list(runner(run_one, jobs))

    lagrange = [0.0] * len(radii)
    lyapunov = [0.0] * len(delta_levels)
    attract = {epsv: [0.0] * len(radii) for epsv in eps_levels}
    verdicts = {"lagrange": True, "lyapunov": True, "attractivity": True,
                "descent": (True if certs is not None else None)}
    worst = {}
    descent_total = 0
    entries = []

    for res in results:
        kind, li = res["kind"], res["level_idx"]
        if res["termination"] != TERMINATED_T_END:
            key = "lagrange" if kind == 0 else "lyapunov"
            verdicts[key] = False
            worst.setdefault(key, {"reason": res["termination"], **_witness(res)})
        if kind == 0:
            lagrange[li] = max(lagrange[li], res["sup"])
            for epsv in eps_levels:
                st = res["settles"][epsv]
                if st is None:
                    verdicts["attractivity"] = False
                    worst.setdefault("attractivity", {"eps": epsv, **_witness(res)})
                else:
                    attract[epsv][li] = max(attract[epsv][li], st)
        else:
            lyapunov[li] = max(lyapunov[li], res["sup"])
        if res["descent_violations"]:
            descent_total += res["descent_violations"]
            verdicts["descent"] = False
            worst.setdefault("descent", _witness(res))
        if res["theta_entry"] is not None:
            entries.append(res["theta_entry"])

    # envelope monotonicity: sup over a smaller ball may not exceed the sup
    # over a larger one beyond the tolerance
    for tbl, key in ((lagrange, "lagrange"), (lyapunov, "lyapunov")):
        for i in range(1, len(tbl)):
            if tbl[i] + envelope_tol < max(tbl[:i]):
                verdicts[key] = False
                worst.setdefault(key, {"reason": "non-monotone sup envelope",
                                       "level_index": i})
    # attractivity tables: nondecreasing in radius, nonincreasing in eps
    for epsv in eps_levels:
        for i in range(1, len(radii)):
            attract[epsv][i] = max(attract[epsv][i], attract[epsv][i - 1])
    for i, epsv in enumerate(eps_levels[1:], start=1):
        smaller = eps_levels[i - 1]
        attract[epsv] = [min(a, b) for a, b in zip(attract[epsv], attract[smaller])]

    return StabilityReport(
        trials=trials, seed=seed, t_end=t_end,
        radii=tuple(radii), delta_levels=tuple(delta_levels), eps_levels=tuple(eps_levels),
        lagrange_table=tuple(lagrange), lyapunov_table=tuple(lyapunov),
        attractivity={epsv: tuple(v) for epsv, v in attract.items()},
        verdicts=verdicts, worst=worst, descent_violations=descent_total,
        theta_entry_times=tuple(sorted(entries)), envelope_tol=envelope_tol,
    )


def _witness(res: dict) -> dict:
    return {"radius": res["radius"], "trial": res["trial"], "sup": res["sup"],
            "final": res["final"], "termination": res["termination"]}
