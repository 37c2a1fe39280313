"""Terminal-manifold backstepping control of the forced Van der Pol oscillator."""

from .adaptation import (
    AdaptationConfig,
    AdaptationState,
    Region,
    SampleWindow,
    adjust_gain,
    identify_mu,
    miac_step,
    worst_case_control,
)
from .control import (
    ChiFunction,
    ChiParams,
    ControlEvaluation,
    backstepping_residual,
    chi,
    closed_loop_field,
    control_generic,
    control_sinusoidal_cancelled,
    register_chi,
    saturate,
    transformed_field_P,
)
from .dynamics import (
    CartesianState,
    ControlBounds,
    PolarState,
    SystemParams,
    cartesian_to_polar,
    polar_to_cartesian,
    vector_field_polar,
)
from .errors import *  # noqa: F401,F403
from .integrator import IntegratorConfig, Trajectory, rk4_step, simulate, simulate_one
from .manifold import (
    Manifold,
    ManifoldParams,
    OffsetState,
    SinusoidalManifold,
    dg_dtheta_sinusoidal,
    g_sinusoidal,
    implicit_cartesian_residual,
    offset,
)
from .runner import run_scenario, sweep
from .scenario import Scenario, Schedule, Segment, reference_config, validate_scenario

__version__ = "0.1.0"
