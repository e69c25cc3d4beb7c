"""chainstab: robust stabilization of disturbed nonlinear systems by
sampled-data set-chain feedback, with simulation and numerical
certification tooling."""

from ._backend import available_backends, backend_name
from .dynamics import (
    Box,
    ConstantDisturbance,
    ControlSystem,
    PiecewiseConstantRandomDisturbance,
    SinusoidalDisturbance,
    TabulatedDisturbance,
    eval_rhs,
    sample_disturbance,
)
from .hybrid import SamplingSchedule, Trajectory, realized_instants, simulate_closed_loop
from .integrate import (
    DenseSegment,
    FiniteEscape,
    IntegratorConfig,
    StepLimitExceeded,
    first_hitting_time,
    integrate_held,
)
from .certify import (
    GridSpec,
    LyapunovData,
    ReachabilityCertificate,
    SamplingBound,
    certify_decrease,
    check_3_3_3_4,
    check_property_Q,
    estimate_attractor_reach,
    lemma_2_7_bounds,
    max_sampling_period,
)
from .setchain import PiecewiseFeedback, Region, SetChain, decompose, synthesize, synthesize_lazy
from .scenarios import build_jet_engine, build_scalar
from .stability import check_set_descent, run_stability_suite

__version__ = "0.1.0"
