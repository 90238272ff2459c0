"""Spectral laboratory for steady perturbations of channel Poiseuille flow.

The package solves the linearized stream-function equation mode by mode on a
Chebyshev grid, reassembles clamped solutions from slip solves plus explicit
wall layers, iterates the quadratic feedback to steady nonlinear states, and
sweeps parameters against the a priori bounds the construction rests on.
"""

from .airy import AI_ZERO, AIP_ZERO, AiryRangeError, AiryValue, airy_ai
from .blayer import (
    BoundaryLayerProfile,
    Decomposition,
    DecompositionError,
    assemble_decomposition,
    bl_profile,
    clamped_equivalence_defect,
    cutoff_jet,
    wall_slope_ratio,
)
from .channel import (
    BaseFlow,
    ChannelParams,
    ForcingMode,
    RegimeThresholds,
    base_flow,
    layer_width,
    mode_rhs,
    resolution_for,
    velocity_of,
    vorticity_of,
)
from .grid import (
    Grid,
    ModeProfile,
    antiderivative,
    build_grid,
    cheb_coefficients,
    cheb_nodes,
    coefficient_derivative,
    differentiate,
    eval_coefficients,
    integrate,
    interpolate,
    parity_parts,
    resolution_for_beta,
)
from .modesolve import (
    LinearSolveResult,
    ModeOperator,
    SingularOperatorError,
    energy_identity_report,
    solve_clamped,
    solve_slip,
    solve_zero_mode,
    weighted_coercivity_gap,
    zero_mode_coefficients,
)
from .nonlinear import (
    IterationReport,
    VelocityField,
    convolution_forcing,
    convolution_forcing_fft,
    field_norms,
    from_stream,
    load_field,
    ns_residual,
    picard_iterate,
    save_field,
    uniqueness_probe,
)
from .scaling import (
    ForcingRecipe,
    LemmaReport,
    SweepRow,
    canonical_recipe,
    fit_exponent,
    random_recipe,
    ratio_spread,
    sweep,
    verify_appendix,
)

__version__ = "0.1.0"

__all__ = [
    "AI_ZERO",
    "AIP_ZERO",
    "AiryRangeError",
    "AiryValue",
    "airy_ai",
    "BoundaryLayerProfile",
    "Decomposition",
    "DecompositionError",
    "assemble_decomposition",
    "bl_profile",
    "clamped_equivalence_defect",
    "cutoff_jet",
    "wall_slope_ratio",
    "BaseFlow",
    "ChannelParams",
    "ForcingMode",
    "RegimeThresholds",
    "base_flow",
    "layer_width",
    "mode_rhs",
    "resolution_for",
    "velocity_of",
    "vorticity_of",
    "Grid",
    "ModeProfile",
    "antiderivative",
    "build_grid",
    "cheb_coefficients",
    "cheb_nodes",
    "coefficient_derivative",
    "differentiate",
    "eval_coefficients",
    "integrate",
    "interpolate",
    "parity_parts",
    "resolution_for_beta",
    "LinearSolveResult",
    "ModeOperator",
    "SingularOperatorError",
    "energy_identity_report",
    "solve_clamped",
    "solve_slip",
    "solve_zero_mode",
    "weighted_coercivity_gap",
    "zero_mode_coefficients",
    "IterationReport",
    "VelocityField",
    "convolution_forcing",
    "convolution_forcing_fft",
    "field_norms",
    "from_stream",
    "load_field",
    "ns_residual",
    "picard_iterate",
    "save_field",
    "uniqueness_probe",
    "ForcingRecipe",
    "LemmaReport",
    "SweepRow",
    "canonical_recipe",
    "fit_exponent",
    "random_recipe",
    "ratio_spread",
    "sweep",
    "verify_appendix",
    "__version__",
]
