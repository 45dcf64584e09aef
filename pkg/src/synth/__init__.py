"""
Synthetic world module for lawline.
"""

from src.synth.world import (
    MODEL_SIZES,
    ComputeLawParams,
    Coupling,
    Grid,
    InterventionKind,
    WorldSpec,
    apply_intervention,
    default_grid,
    implied_compute_to_loss,
)
from src.synth.generator import generate, generate_scenario

__all__ = [
    "MODEL_SIZES",
    "ComputeLawParams",
    "Coupling",
    "Grid",
    "InterventionKind",
    "WorldSpec",
    "apply_intervention",
    "default_grid",
    "implied_compute_to_loss",
    "generate",
    "generate_scenario",
]
