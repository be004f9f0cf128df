"""Ricci flow of a nilpotent principal bundle over a one-dimensional base."""
from .evolve import conjugate_heat_backward, heat_mass, integrate_bundle, stable_dt
from .functionals import (
    TERM_NAMES,
    FunctionalReport,
    monotonicity_report,
    theorem_integrands,
    theorem_terms,
    w_plus_bundle,
    w_plus_density,
)
from .geometry import (
    BundleRicci,
    FlowRHS,
    bundle_ricci,
    covariant_dG,
    fiber_curvature_field,
    flow_rhs,
    gauged_flow_rhs,
)
from .grid import BaseGrid
from .rigidity import RESIDUAL_NAMES, blowdown_driver, rescaled_state, rigidity_diagnostics
from .samples import random_potential, random_smooth_state
from .state import BundleState, load_checkpoint, save_checkpoint

__all__ = [
    "BaseGrid",
    "BundleRicci",
    "BundleState",
    "FlowRHS",
    "FunctionalReport",
    "RESIDUAL_NAMES",
    "TERM_NAMES",
    "blowdown_driver",
    "bundle_ricci",
    "conjugate_heat_backward",
    "covariant_dG",
    "fiber_curvature_field",
    "flow_rhs",
    "gauged_flow_rhs",
    "heat_mass",
    "integrate_bundle",
    "load_checkpoint",
    "monotonicity_report",
    "random_potential",
    "random_smooth_state",
    "rescaled_state",
    "rigidity_diagnostics",
    "save_checkpoint",
    "stable_dt",
    "theorem_integrands",
    "theorem_terms",
    "w_plus_bundle",
    "w_plus_density",
]
