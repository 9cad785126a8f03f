"""Saturated-feedback stabilization toolkit for the 4-state oscillatory chain.

Simulates the model family (original, rescaled, rotating-frame, averaged),
builds the explicit stabilizing gain, and verifies the energy-decrease,
averaging, capture, and spectral claims behind it numerically.
"""

__version__ = "0.1.0"

from .errors import (
    CdistabError,
    ConfigError,
    DivergenceError,
    DomainError,
    InvalidSaturationError,
    NotControllableError,
    PreconditionError,
    QuadratureError,
    RangeError,
    UsageError,
)
from .geometry import A0, CoordTag, State4, angle_of, b_eps, d_eps, j2_omega, perp, rotation
from .saturation import (
    SaturationFn,
    ValidationReport,
    arctan_saturation,
    custom_saturation,
    load_custom_saturation_csv,
    standard_saturation,
    tanh_saturation,
    validate_saturation,
)
from .modified import BoundReport, ModifiedSaturation, check_scaling_bound
from .systems import (
    FeedbackGain,
    NormalFormData,
    SystemKind,
    SystemSpec,
    a_eps_matrix,
    averaged_field,
    averaged_field_jacobian,
    feedback_gain,
    monotonicity_gap,
    normal_form,
    rhs,
    s_to_t,
    scale_trajectory,
    spectral_abscissa,
    t_to_s,
    t0_linearization,
    t0_linearization_block,
)
from .integrator import StepControl, Trajectory, batch_map, integrate, ode_residual
from .lyapunov import (
    CaptureReport,
    L2Report,
    LyapunovContext,
    TailReport,
    WindowReport,
    barbalat_tail_check,
    capture_check,
    l2_estimate_check,
    v0,
    v0_batch,
    v0_dot_t0,
    v0_dot_teps_terms,
    window_decrease_check,
    window_integrals,
)
from .averaging import AveragingStudy, convergence_study, oscillatory_field, window_average
