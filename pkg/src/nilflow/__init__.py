"""Ricci flow on nilpotent Lie groups and on principal bundles with nilpotent fibres."""
from .curvature import CurvaturePackage, curvature, ricci_arrays, variation_derivatives
from .errors import ContractViolation, InputError, NilflowError, NumericalFailure
from .group_flow import (
    GroupTrajectory,
    integrate_group_flow,
    nilsoliton_certificate,
    soliton_flow_eval,
    w_plus_group,
    w_plus_group_rate,
)
from .lie import MetricState, NilpotentAlgebra, load_algebra_json, nil3_model, validate_algebra

__version__ = "0.1.0"

__all__ = [
    "ContractViolation",
    "CurvaturePackage",
    "GroupTrajectory",
    "InputError",
    "MetricState",
    "NilflowError",
    "NilpotentAlgebra",
    "NumericalFailure",
    "curvature",
    "integrate_group_flow",
    "load_algebra_json",
    "nil3_model",
    "nilsoliton_certificate",
    "ricci_arrays",
    "soliton_flow_eval",
    "validate_algebra",
    "variation_derivatives",
    "w_plus_group",
    "w_plus_group_rate",
]
