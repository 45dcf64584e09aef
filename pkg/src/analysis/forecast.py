"""
Compute-to-downstream forecasts by chaining a compute-to-loss law with a
loss-to-loss law fitted on the same configuration.
"""

from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import InvalidCompositionError
from src.core.logger import get_logger
from src.core.types import LossUnit
from src.fitlaw.laws import ComputeToLossLaw, LossToLossLaw, predict_y

logger = get_logger("forecast")


class DownstreamForecast(BaseModel):
    """Predicted train-side and test-side loss of a model of N parameters trained on D tokens."""

    model_config = ConfigDict(frozen=True)

    params_n: int = Field(..., ge=1)
    tokens_d: int = Field(..., ge=1)
    predicted_train_loss: float
    predicted_test_loss: float
    laws_used: Tuple[str, str] = Field(..., description="(compute-to-loss law id, loss-to-loss law id)")
    unit: LossUnit


def check_composable(train_law: ComputeToLossLaw, l2l: LossToLossLaw) -> None:
    """Raise InvalidCompositionError unless ``l2l`` consumes what ``train_law`` predicts."""
    if train_law.fallback_used:
        raise InvalidCompositionError(
            f"{train_law.law_id} holds only a min-loss irreducible error and cannot predict at (N, D)"
        )
    if train_law.eval_dataset != l2l.x_dataset:
        raise InvalidCompositionError(
            f"{train_law.law_id} predicts '{train_law.eval_dataset}' but {l2l.law_id} "
            f"expects '{l2l.x_dataset}'"
        )
    if train_law.config != l2l.config:
        raise InvalidCompositionError(
            f"Configurations differ: {train_law.config.label} vs {l2l.config.label}"
        )
    if train_law.unit != l2l.unit:
        raise InvalidCompositionError(
            f"Units differ: {train_law.unit.value} vs {l2l.unit.value}"
        )


def forecast_downstream(
    train_law: ComputeToLossLaw, l2l: LossToLossLaw, params_n: int, tokens_d: int
) -> DownstreamForecast:
    """
    Predict test loss from compute.

    Args:
        train_law: Compute-to-loss law on the x dataset
        l2l: Loss-to-loss law from the x dataset to the test dataset
        params_n: Parameters N
        tokens_d: Training tokens D

    Returns:
        DownstreamForecast: train loss L_x(N, D) and test loss predict_y(l2l, L_x)

    Raises:
        InvalidCompositionError: If the laws are for different datasets, configurations
            or units, or the train law is a fallback without a curve
    """
    check_composable(train_law, l2l)
    train_loss = float(train_law.predict(params_n, tokens_d))
    test_loss = predict_y(l2l, train_loss)
    logger.debug(f"N={params_n} D={tokens_d}: train {train_loss:.6f} -> test {test_loss:.6f}")
    return DownstreamForecast(
        params_n=params_n,
        tokens_d=tokens_d,
        predicted_train_loss=train_loss,
        predicted_test_loss=test_loss,
        laws_used=(train_law.law_id, l2l.law_id),
        unit=l2l.unit,
    )
