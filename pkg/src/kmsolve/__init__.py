"""Inertial and inexact Krasnoselskii-Mann fixed-point iteration.

One engine loop covers the plain, inexact, inertial, and combined
variants; schedules carry the feasibility conditions, diagnostics the
residual rate certificate and run post-mortems, applications the
resolvent and forward-backward front ends, and the CLI drives JSON
configs.  Everything public is re-exported here.
"""

from .applications import (
    LassoInstance,
    box_intersection_pieces,
    lasso_fbs_pieces,
    lasso_kkt_gap,
    lasso_objective,
    plant_lasso,
    solve_fbs,
    solve_ppa,
)
from .diagnostics import (
    ConsistencyItem,
    ConsistencyReport,
    RateCertificate,
    certificate_ceiling,
    consistency_report,
    effective_error_bound,
    effective_error_bounds,
    quasi_fejer_violations,
    rate_certificate,
)
from .engine import (
    PROBLEM_KINDS,
    ROUTES,
    STOP_REASONS,
    Problem,
    RunResult,
    inertial_km,
    inexact_km,
    iterate,
    km,
)
from .operators import (
    OPERATOR_KINDS,
    IsmOperator,
    OperatorSpec,
    inner,
    make_affine,
    make_box_projection,
    make_fb_composition,
    make_gradient_step_ism,
    make_identity,
    make_soft_threshold,
    norm,
    quadratic_gradient,
    spectral_norm,
    unwrap_averaged,
)
from .schedules import (
    ERROR_KINDS,
    ConditionCheck,
    ConditionReport,
    ErrorModel,
    ParamSchedule,
    constant_schedule,
    delayed_inertia_schedule,
    delta_threshold,
    emit_error,
    lambda_ceiling_ii,
    scale_ceiling_for_averaged,
    validate_conditions_i,
    validate_conditions_ii,
    validate_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "PROBLEM_KINDS",
    "ROUTES",
    "STOP_REASONS",
    "OPERATOR_KINDS",
    "ERROR_KINDS",
    "Problem",
    "RunResult",
    "iterate",
    "km",
    "inexact_km",
    "inertial_km",
    "OperatorSpec",
    "IsmOperator",
    "inner",
    "norm",
    "spectral_norm",
    "make_identity",
    "make_affine",
    "make_soft_threshold",
    "make_box_projection",
    "make_gradient_step_ism",
    "make_fb_composition",
    "quadratic_gradient",
    "unwrap_averaged",
    "ParamSchedule",
    "constant_schedule",
    "delayed_inertia_schedule",
    "ErrorModel",
    "emit_error",
    "ConditionCheck",
    "ConditionReport",
    "validate_conditions_i",
    "validate_conditions_ii",
    "validate_schedule",
    "delta_threshold",
    "lambda_ceiling_ii",
    "scale_ceiling_for_averaged",
    "RateCertificate",
    "rate_certificate",
    "certificate_ceiling",
    "quasi_fejer_violations",
    "ConsistencyItem",
    "ConsistencyReport",
    "consistency_report",
    "effective_error_bound",
    "effective_error_bounds",
    "LassoInstance",
    "plant_lasso",
    "lasso_kkt_gap",
    "lasso_fbs_pieces",
    "lasso_objective",
    "box_intersection_pieces",
    "solve_ppa",
    "solve_fbs",
    "__version__",
]
