"""
Core functionality for lawline: domain types, units, errors, settings and logging.
"""

from src.core.logger import get_logger, configure_logging
from src.core.errors import (
    LawlineError,
    InvalidArgumentError,
    UsageError,
    MissingDataError,
    EmptyInputError,
    UnderdeterminedError,
    InsufficientVariationError,
    ConvergenceError,
    UnitMismatchError,
    InvalidCompositionError,
)
from src.core.units import nll_to_bpb, bpb_to_nll, average_loss
from src.core.types import (
    LossUnit,
    ConfigId,
    LossMeasurement,
    CheckpointRecord,
    require_single_unit,
)

__all__ = [
    "get_logger",
    "configure_logging",
    "LawlineError",
    "InvalidArgumentError",
    "UsageError",
    "MissingDataError",
    "EmptyInputError",
    "UnderdeterminedError",
    "InsufficientVariationError",
    "ConvergenceError",
    "UnitMismatchError",
    "InvalidCompositionError",
    "nll_to_bpb",
    "bpb_to_nll",
    "average_loss",
    "LossUnit",
    "ConfigId",
    "LossMeasurement",
    "CheckpointRecord",
    "require_single_unit",
]
