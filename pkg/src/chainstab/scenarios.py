"""Built-in scenarios: the perturbed jet-engine model and the scalar
positive-drift system, fully parameterized with their feedback chains,
certificates and sampling-period constants.

Registered under the labels "jet_engine_perturbed" and
"scalar_positive_drift" for the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .certify import (
    LyapunovData,
    ReachabilityCertificate,
    SamplingBound,
    lemma_2_7_bounds,
    make_sampling_bound,
)
from .dynamics import (
    Box,
    ConstantDisturbance,
    ControlSystem,
    SinusoidalAbsPerturbation,
    SinusoidalDisturbance,
    ZeroPerturbation,
)
from .setchain import (
    Band,
    HalfSpace,
    Intersection,
    PiecewiseFeedback,
    Region,
    Sublevel,
    interval,
    synthesize,
    synthesize_lazy,
)


class NonpositiveEpsilon(ValueError):
    pass


class NotPositiveDrift(ValueError):
    """Drift must vanish at 0 and be positive elsewhere."""


# ---------------------------------------------------------------------------
# Jet engine (two-state surge model, perturbed)
# ---------------------------------------------------------------------------


def jet_rhs(d, x, u):
    x1 = x[0]
    return (d[0] * x1 + 1.5 * d[1] * x1 * x1 - 0.5 * x1 * x1 * x1 + x[1], u[0])


def jet_rhs_batch(d, X, u):
    x1 = X[:, 0]
    f1 = d[0] * x1 + 1.5 * d[1] * x1 * x1 - 0.5 * x1 * x1 * x1 + X[:, 1]
    f2 = np.full_like(x1, u[0])
    return np.stack([f1, f2], axis=1)


def jet_V(x):
    w = x[1] + 5.0 * x[0]
    return 0.5 * x[0] * x[0] + 0.5 * w * w


def jet_V_grad(x):
    w = x[1] + 5.0 * x[0]
    return (x[0] + 5.0 * w, w)


def jet_V_batch(X):
    w = X[:, 1] + 5.0 * X[:, 0]
    return 0.5 * X[:, 0] * X[:, 0] + 0.5 * w * w


def jet_V_grad_batch(X):
    w = X[:, 1] + 5.0 * X[:, 0]
    return np.stack([X[:, 0] + 5.0 * w, w], axis=1)


def jet_inner_feedback(x):
    x1 = x[0]
    return (-421.0 * x1 - 89.0 * x[1] + 2.5 * x1 * x1 * x1,)


def quadratic_x1(x):
    return x[0] * x[0]


def quadratic_x1_grad(x):
    return (2.0 * x[0], 0.0)


def quadratic_x1_batch(X):
    return X[:, 0] * X[:, 0]


JET_LYAPUNOV = LyapunovData(V=jet_V, grad=jet_V_grad, label="jet_V",
                            V_batch=jet_V_batch, grad_batch=jet_V_grad_batch)
X1_SQUARED = LyapunovData(V=quadratic_x1, grad=quadratic_x1_grad, label="x1_squared",
                          V_batch=quadratic_x1_batch)


@dataclass(frozen=True)
class JetEngineScenario:
    epsilon: float
    R: float
    L: float
    gamma: float
    M: float
    r: float
    sim_period: float
    system: ControlSystem
    lyap: LyapunovData
    k_inner: Callable
    theta: Region
    omega2: Region
    omega3: Region
    omega4: Region
    target_A: Region
    controls: tuple
    feedback: PiecewiseFeedback
    certificates: dict
    sampling_bound: SamplingBound
    x0_default: tuple = (10.0, 2.0)
    t_end_default: float = 20.0

    @property
    def regions(self) -> tuple:
        return (self.theta, self.omega2, self.omega3, self.omega4)

    def figure_inputs(self, figure: int):
        """Disturbance and schedule perturbation for the three standard runs."""
        D = self.system.disturbance_box
        if figure == 1:
            return ConstantDisturbance(box=D, value_vec=(0.0, 1.0)), ZeroPerturbation()
        if figure == 2:
            return (SinusoidalDisturbance(box=D, axis=1, amplitude=1.0, frequency=1.0,
                                          offset=0.0, base=(1.0, 0.0)),
                    ZeroPerturbation())
        if figure == 3:
            return ConstantDisturbance(box=D, value_vec=(1.0, 1.0)), SinusoidalAbsPerturbation()
        raise ValueError(f"figure must be 1, 2 or 3, got {figure}")


def jet_example_certificates(r: float = 1.0, radius_max: float = 60.0,
                             radius_step: float = 0.05) -> dict:
    """Reachability certificates for the three outer chain levels.

    Levels 3 and 4 use the closed-form envelopes of the vertical-channel
    argument (c = 0, b(s) = s, a(s) = 2 s exp(4 + 4 s)); level 2 uses the
    sublevel-set construction for V_q = x1^2 with R = 16, delta = 7, growth
    exponent p = 4 and comparison pair a1(s) = s, a2(s) = 2 s.
    """
    radii = np.arange(0.0, radius_max + radius_step / 2, radius_step)

    def a_exp(s):
        return 2.0 * s * math.exp(4.0 + 4.0 * s)

    omega2 = Band(axis=1, half_width=1.0, label="Omega2",
                  bounding=Box((-20.0, -1.0), (20.0, 1.0)))
    omega3 = HalfSpace((0.0, 1.0), -1.0, label="Omega3",
                       bounding=Box((-10.0, -10.0), (10.0, -1.0)))
    omega4 = HalfSpace((0.0, -1.0), -1.0, label="Omega4",
                       bounding=Box((-10.0, 1.0), (10.0, 10.0)))
    target_A = Intersection((Band(axis=1, half_width=1.0), Band(axis=0, half_width=4.0)),
                            label="A", bounding=Box((-4.0, -1.0), (4.0, 1.0)))

    cert4 = ReachabilityCertificate.from_functions(
        c=0.0, b_fn=lambda s: s, a_fn=a_exp, radii=radii, control=(-1.0,), dwell=r,
        source=omega4, target=omega2,
        notes="vertical channel falls at unit rate; hitting time is x20 - 1")
    cert3 = ReachabilityCertificate.from_functions(
        c=0.0, b_fn=lambda s: s, a_fn=a_exp, radii=radii, control=(1.0,), dwell=r,
        source=omega3, target=omega2,
        notes="vertical channel rises at unit rate; the dynamics give hitting "
              "time -1 - x20 (= |x20| - 1), which b(s) = s dominates")
    cert2 = lemma_2_7_bounds(
        X1_SQUARED, R=16.0, delta=7.0, p=4.0,
        a1=lambda s: s, a2=lambda s: 2.0 * s, r=r,
        radius_grid=radii, dim=2, control=(0.0,),
        source=omega2, target=target_A,
        notes="horizontal channel contracts into |x1| <= 4 under zero control")
    return {2: cert2, 3: cert3, 4: cert4, "target_A": target_A,
            "omega2": omega2, "omega3": omega3, "omega4": omega4}


def build_jet_engine(epsilon: float = 0.001, sim_period: float = 0.001) -> JetEngineScenario:
    """Fully populated jet-engine scenario.

    ``sim_period`` is the base sampling period actually used in simulation;
    the certified admissible period from the closed-form constants is many
    orders of magnitude smaller and is reported side by side, never silently
    substituted.
    """
    if epsilon <= 0.0:
        raise NonpositiveEpsilon(f"epsilon = {epsilon} must be positive")
    if sim_period <= 0.0:
        raise ValueError("sim_period must be positive")
    R = 457.0 / 2.0 + epsilon
    L = 7.0 / 2.0 + math.sqrt(2.0 * R)
    gamma = 9.0 * R / 4.0 + (R * R + 1.0) / 2.0 + 0.5 * (5.0 * R - 332.0) ** 2
    M = math.sqrt((80.0 / 3.0) * (421.0**2 + 225.0 * R * R))
    r = 1.0

    D = Box((-1.0, -1.0), (1.0, 1.0))
    system = ControlSystem(
        label="jet_engine_perturbed",
        n=2, m=1, l=2,
        rhs=jet_rhs,
        disturbance_box=D,
        control_set=Box.reals(1),
        origin_equilibrium=True,
        kernel_id=1,
        rhs_batch=jet_rhs_batch,
    )

    span1 = math.sqrt(2.0 * R)
    theta = Sublevel(jet_V, R, strict=True, fn_id="jet_V", label="Theta",
                     bounding=Box((-span1, -6.0 * span1), (span1, 6.0 * span1)))
    certs = jet_example_certificates(r=r)
    omega2, omega3, omega4 = certs["omega2"], certs["omega3"], certs["omega4"]
    controls = ((0.0,), (1.0,), (-1.0,))
    feedback = synthesize(jet_inner_feedback, theta, h_tilde=sim_period,
                          regions=(theta, omega2, omega3, omega4),
                          controls=controls, r=r, control_set=system.control_set)
    bound = make_sampling_bound(L, gamma, M, R=R, rho=lambda s: s)
    return JetEngineScenario(
        epsilon=epsilon, R=R, L=L, gamma=gamma, M=M, r=r, sim_period=sim_period,
        system=system, lyap=JET_LYAPUNOV, k_inner=jet_inner_feedback,
        theta=theta, omega2=omega2, omega3=omega3, omega4=omega4,
        target_A=certs["target_A"], controls=controls, feedback=feedback,
        certificates={2: certs[2], 3: certs[3], 4: certs[4]},
        sampling_bound=bound,
    )


# ---------------------------------------------------------------------------
# Scalar positive-drift system
# ---------------------------------------------------------------------------


def _square_drift(x):
    return x * x


@dataclass(frozen=True)
class ScalarScenario:
    drift: Callable
    L: float
    h_tilde: float
    r: float
    system: ControlSystem
    theta: Region
    k_inner: Callable
    feedback: PiecewiseFeedback
    t_end_default: float = 60.0

    def cell_control(self, j: int) -> tuple:
        return self.feedback.chain.control(j)


def _estimate_drift_constant(a_fn: Callable, grid_step: float = 1e-4) -> int:
    """Smallest integer L with a(x) <= L x on [0, 2], by grid search."""
    count = int(round(2.0 / grid_step))
    xs = np.linspace(grid_step, 2.0, count)  # exact endpoint, no arange drift
    worst = max(float(a_fn(float(x))) / float(x) for x in xs)
    return max(1, math.ceil(worst - 1e-12))


def _grid_max(a_fn: Callable, lo: float, hi: float, grid_step: float = 1e-4) -> float:
    count = int(round((hi - lo) / grid_step)) + 1
    xs = np.linspace(lo, hi, count)
    return max(float(a_fn(float(x))) for x in xs)


def build_scalar(a_fn: Optional[Callable] = None) -> ScalarScenario:
    """Scalar system x' = a(x) + u with u <= 0 and positive drift a.

    The default drift is a(x) = x^2 (served by the compiled kernel). The
    chain is countable: Theta = (-inf, 2) and the unit intervals (j-1, j]
    with controls v_j = -1 - max a on [j-1, j] (grid-searched maximum).
    """
    default = a_fn is None
    drift = _square_drift if default else a_fn
    if abs(drift(0.0)) > 1e-14:
        raise NotPositiveDrift("a(0) must be 0")
    probe = np.linspace(1e-3, 100.0, 997)
    if any(drift(float(x)) <= 0.0 for x in probe):
        raise NotPositiveDrift("a(x) must be positive for x > 0 (sampled on (0, 100])")

    L = _estimate_drift_constant(drift)
    h_tilde = 1.0 / (L + 1.0)
    r = 1.0

    def rhs(d, x, u, _a=drift):
        return (_a(x[0]) + u[0],)

    system = ControlSystem(
        label="scalar_positive_drift",
        n=1, m=1, l=0,
        rhs=rhs,
        disturbance_box=Box((), ()),
        control_set=Box((-math.inf,), (0.0,)),
        origin_equilibrium=True,
        kernel_id=2 if default else 0,
    )

    theta = HalfSpace((1.0,), 2.0, strict=True, label="Theta",
                      bounding=Box((-50.0,), (2.0,)))

    Lp1 = float(L + 1)

    def k_inner(x):
        xv = x[0]
        return (0.0,) if xv <= 0.0 else (-Lp1 * xv,)

    def generator(j, _a=drift):
        lo, hi = float(j - 1), float(j)
        control = (-1.0 - _grid_max(_a, lo, hi),)
        return interval(lo, hi, lo_strict=True, hi_strict=False,
                        label=f"Omega{j}"), control

    def locator(x):
        return 1 if x[0] < 2.0 else max(2, math.ceil(x[0]))

    feedback = synthesize_lazy(k_inner, theta, h_tilde=h_tilde, generator=generator,
                               r=r, locator=locator, disjoint_tail=True,
                               control_set=system.control_set)
    return ScalarScenario(drift=drift, L=float(L), h_tilde=h_tilde, r=r,
                          system=system, theta=theta, k_inner=k_inner, feedback=feedback)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

SCENARIO_BUILDERS = {
    "jet_engine_perturbed": build_jet_engine,
    "scalar_positive_drift": build_scalar,
}

SCENARIO_DESCRIPTIONS = {
    "jet_engine_perturbed":
        "planar surge model with disturbance box [-1,1]^2, quadratic-energy inner "
        "feedback and a four-set chain; default run starts at (10, 2)",
    "scalar_positive_drift":
        "scalar x' = a(x) + u with nonpositive control, countable interval chain; "
        "default drift a(x) = x^2",
}
