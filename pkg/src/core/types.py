"""
Domain types shared by every lawline module.

A checkpoint record is one evaluated model snapshot: the training configuration it
belongs to, its parameter count N, its training tokens D and the losses it reached on
a number of evaluation datasets. All types are immutable pydantic models.
"""

from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.errors import InvalidArgumentError, MissingDataError, UnitMismatchError
from src.core.units import average_loss, bpb_to_nll, nll_to_bpb


class LossUnit(str, Enum):
    """Unit a loss value is expressed in."""

    NATS_PER_TOKEN = "nats"
    BITS_PER_BYTE = "bpb"


class ConfigId(BaseModel):
    """
    Identifies one training setup: the pretraining set, architecture and tokenizer,
    plus any further settings (context length, optimizer, schedule) in ``extra``.

    Two configurations are equal iff every field, including ``extra``, is equal.
    """

    model_config = ConfigDict(frozen=True)

    pretrain_data: str = Field(..., min_length=1, description="Pretraining set label")
    architecture: str = Field(..., min_length=1, description="Architecture label")
    tokenizer: str = Field(..., min_length=1, description="Tokenizer label")
    extra: Dict[str, str] = Field(
        default_factory=dict, description="Further settings, e.g. context length"
    )

    @field_validator("extra", mode="before")
    @classmethod
    def _stringify_extra(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {str(k): str(v) for k, v in value.items()}
        return value

    @property
    def sort_key(self) -> Tuple[str, str, str, Tuple[Tuple[str, str], ...]]:
        return (
            self.pretrain_data,
            self.architecture,
            self.tokenizer,
            tuple(sorted(self.extra.items())),
        )

    @property
    def label(self) -> str:
        """Stable display name, e.g. ``FW-Edu/Llama/tiktoken[context=2048]``."""
        base = f"{self.pretrain_data}/{self.architecture}/{self.tokenizer}"
        if not self.extra:
            return base
        pairs = ",".join(f"{k}={v}" for k, v in sorted(self.extra.items()))
        return f"{base}[{pairs}]"

    def __hash__(self) -> int:
        return hash(self.sort_key)


class LossMeasurement(BaseModel):
    """A loss value on one dataset, with the token and byte counts it was taken over."""

    model_config = ConfigDict(frozen=True)

    dataset: str = Field(..., min_length=1, description="Evaluation dataset label")
    value: float = Field(..., ge=0.0, allow_inf_nan=False, description="Loss value")
    unit: LossUnit = Field(..., description="Unit of value")
    token_count: Optional[int] = Field(default=None, ge=1, description="Evaluated tokens")
    byte_count: Optional[int] = Field(default=None, ge=1, description="UTF-8 bytes of the evaluated text")

    def to_unit(self, unit: LossUnit) -> "LossMeasurement":
        """
        Express this measurement in another unit.

        Args:
            unit: Target unit.

        Returns:
            LossMeasurement: A converted copy (or self when the unit already matches).

        Raises:
            InvalidArgumentError: If token or byte counts are needed but missing.
        """
        if unit == self.unit:
            return self
        if self.token_count is None or self.byte_count is None:
            raise InvalidArgumentError(
                f"Converting '{self.dataset}' from {self.unit.value} to {unit.value} "
                "needs both token_count and byte_count"
            )
        if unit == LossUnit.BITS_PER_BYTE:
            value = nll_to_bpb(self.value, self.token_count, self.byte_count)
        else:
            value = bpb_to_nll(self.value, self.token_count, self.byte_count)
        return self.model_copy(update={"value": value, "unit": unit})


class CheckpointRecord(BaseModel):
    """
    One evaluated checkpoint.

    Attributes:
        config: Training configuration the checkpoint belongs to
        params_n: Parameter count N
        tokens_d: Training tokens seen D
        seed: Training seed, if known
        step: Training step, if known
        losses: Dataset label to measurement; all in one unit
    """

    model_config = ConfigDict(frozen=True)

    config: ConfigId
    params_n: int = Field(..., ge=1, description="Parameters N")
    tokens_d: int = Field(..., ge=1, description="Training tokens D")
    seed: Optional[int] = Field(default=None, description="Training seed")
    step: Optional[int] = Field(default=None, ge=0, description="Training step")
    losses: Dict[str, LossMeasurement] = Field(..., description="Per-dataset losses")

    @model_validator(mode="before")
    @classmethod
    def _label_losses(cls, data: Any) -> Any:
        # The canonical file format keys measurements by dataset and omits the label
        if isinstance(data, dict) and isinstance(data.get("losses"), dict):
            losses = {}
            for label, measurement in data["losses"].items():
                if isinstance(measurement, dict) and "dataset" not in measurement:
                    measurement = {"dataset": label, **measurement}
                losses[label] = measurement
            data = {**data, "losses": losses}
        return data

    @model_validator(mode="after")
    def _check_losses(self) -> "CheckpointRecord":
        if not self.losses:
            raise ValueError("losses must not be empty")
        for label, measurement in self.losses.items():
            if measurement.dataset != label:
                raise ValueError(
                    f"loss keyed '{label}' is labelled '{measurement.dataset}'"
                )
        units = {m.unit for m in self.losses.values()}
        if len(units) > 1:
            raise ValueError(
                f"mixed loss units in one record: {sorted(u.value for u in units)}"
            )
        return self

    @property
    def unit(self) -> LossUnit:
        return next(iter(self.losses.values())).unit

    @property
    def datasets(self) -> List[str]:
        return list(self.losses)

    def loss(self, dataset: str) -> float:
        """Loss value on ``dataset``; raises MissingDataError if absent."""
        try:
            return self.losses[dataset].value
        except KeyError:
            raise MissingDataError([dataset], context=self.config.label) from None

    def converted(self, unit: LossUnit) -> "CheckpointRecord":
        """Copy with every measurement expressed in ``unit``."""
        if unit == self.unit:
            return self
        losses = {label: m.to_unit(unit) for label, m in self.losses.items()}
        return self.model_copy(update={"losses": losses})

    def with_average(self, label: str, datasets: Iterable[str]) -> "CheckpointRecord":
        """
        Copy with an extra measurement ``label`` holding the mean of ``datasets``.

        Counts are dropped on the averaged measurement; convert units before averaging.
        """
        value = average_loss(self, list(datasets))
        losses = dict(self.losses)
        losses[label] = LossMeasurement(dataset=label, value=value, unit=self.unit)
        return self.model_copy(update={"losses": losses})

    def to_json_dict(self) -> Dict[str, Any]:
        """Canonical JSON-lines form (measurements keyed by label, label omitted)."""
        return {
            "config": {
                "pretrain_data": self.config.pretrain_data,
                "architecture": self.config.architecture,
                "tokenizer": self.config.tokenizer,
                "extra": dict(self.config.extra),
            },
            "params_n": self.params_n,
            "tokens_d": self.tokens_d,
            "seed": self.seed,
            "step": self.step,
            "losses": {
                label: {
                    "value": m.value,
                    "unit": m.unit.value,
                    "token_count": m.token_count,
                    "byte_count": m.byte_count,
                }
                for label, m in self.losses.items()
            },
        }

    @property
    def identity(self) -> Tuple[ConfigId, int, int, Optional[int], Optional[int]]:
        """Key under which two records count as duplicates."""
        return (self.config, self.params_n, self.tokens_d, self.seed, self.step)


def require_single_unit(records: Iterable[CheckpointRecord], what: str = "fit") -> LossUnit:
    """
    Return the one unit shared by ``records``.

    Raises:
        UnitMismatchError: If the records carry more than one unit.
    """
    units = {r.unit for r in records}
    if len(units) > 1:
        raise UnitMismatchError(
            f"Refusing to mix units in one {what}: {sorted(u.value for u in units)}"
        )
    if not units:
        raise MissingDataError(["<any>"], context=what)
    return units.pop()
