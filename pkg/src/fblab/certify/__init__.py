"""Certificates for the viscosity, flatness, Harnack and improvement statements."""

from .anchors import ANCHORS
from .flatness import (
    FlatnessCertificate,
    VanishVerdict,
    direction_lattice,
    measure_flatness,
    vanish_check,
)
from .harnack import (
    CascadeRecord,
    HarnackBand,
    HypothesisError,
    NotFlatError,
    SmallnessVerdict,
    alpha_from_shrink,
    band_slack,
    check_flat_regime,
    component_smallness,
    harnack_cascade,
    harnack_step,
    smallest_flat_eps,
    tightest_band,
)
from .iof import TiltResult, improvement_check, recenter_at_free_boundary
from .viscosity import (
    GradientResidual,
    ViscosityReport,
    fb_gradient_residual,
    viscosity_check,
)

__all__ = [
    "ANCHORS",
    "CascadeRecord",
    "FlatnessCertificate",
    "GradientResidual",
    "HarnackBand",
    "HypothesisError",
    "NotFlatError",
    "SmallnessVerdict",
    "TiltResult",
    "VanishVerdict",
    "ViscosityReport",
    "alpha_from_shrink",
    "band_slack",
    "check_flat_regime",
    "component_smallness",
    "direction_lattice",
    "fb_gradient_residual",
    "harnack_cascade",
    "harnack_step",
    "improvement_check",
    "measure_flatness",
    "recenter_at_free_boundary",
    "smallest_flat_eps",
    "tightest_band",
    "vanish_check",
    "viscosity_check",
]
