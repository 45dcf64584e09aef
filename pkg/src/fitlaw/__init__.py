"""
Scaling-law fitting module for lawline.
"""

from src.fitlaw.engine import FitDiagnostics, nlls_fit
from src.fitlaw.laws import (
    ComputeToLossLaw,
    LossToLossLaw,
    LawBundle,
    compute_to_loss_curve,
    compute_to_loss_jacobian,
    loss_to_loss_curve,
    loss_to_loss_jacobian,
    predict_y,
    r_squared,
)
from src.fitlaw.fitters import (
    GroupFitStatus,
    TwoStageFit,
    estimate_irreducible_fallback,
    fit_compute_to_loss,
    fit_groups,
    fit_irreducible,
    fit_loss_to_loss,
    fit_two_stage,
)

__all__ = [
    "FitDiagnostics",
    "nlls_fit",
    "ComputeToLossLaw",
    "LossToLossLaw",
    "LawBundle",
    "compute_to_loss_curve",
    "compute_to_loss_jacobian",
    "loss_to_loss_curve",
    "loss_to_loss_jacobian",
    "predict_y",
    "r_squared",
    "GroupFitStatus",
    "TwoStageFit",
    "estimate_irreducible_fallback",
    "fit_compute_to_loss",
    "fit_groups",
    "fit_irreducible",
    "fit_loss_to_loss",
    "fit_two_stage",
]
