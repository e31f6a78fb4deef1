"""Calcium-signalling ODE models and their mechanochemical extension.

Steady states and linear stability, two-parameter bifurcation curves in
closed parametric form, brute-force limit-cycle sweeps with an adaptive
embedded Runge-Kutta integrator, and the slow-fast decomposition of the
relaxation oscillations including the analytic transition layer.
"""

from .model import (
    DEFAULT_PARAMS,
    DimensionalParams,
    ModelParams,
    State2,
    State3,
    StressKind,
    StressLaw,
    VdpParams,
    nondimensionalize,
    params_from_json,
    params_to_json,
    rhs_atri,
    rhs_mech,
    rhs_vdp,
    stress_derivative,
    stress_eval,
    viscoelastic_reduction,
)
from .equilibria import (
    BifurcationLadder,
    Equilibrium,
    EventKind,
    StabilityClass,
    classify,
    equilibria_atri,
    equilibria_mech,
    ladder_atri,
    nullcline_max,
    nullclines_atri,
)
from .curves import (
    BifurcationCurve,
    CurveKind,
    CurveSample,
    Morphology,
    cusp_alpha,
    curve_summary,
    discr_curve,
    fold_curve,
    fold_merge_lambda,
    hopf_curve,
    hopf_extremals,
    hopf_morphology,
    lambda_max_vs_alpha,
)
from .simulate import (
    CycleSummary,
    IntegrationError,
    IntegratorConfig,
    SweepPoint,
    Trajectory,
    frequency_profile,
    integrate,
    measure_cycle,
    sweep,
)
from .slowfast import (
    BreakCurve3,
    GsptTrajectory,
    Layer2,
    Layer3,
    SlowManifold2,
    SlowManifold3,
    break_curve_3d,
    compose_relaxation_oscillation,
    fast_flow_2d,
    slow_flow_2d,
    slow_flow_3d,
    transition_layer_2d,
    transition_layer_3d,
    turning_margin,
)

__version__ = "0.1.0"
