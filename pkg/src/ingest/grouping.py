"""
Record collections and configuration grouping.

Checkpoints of one training configuration form one point cloud; its loss-to-loss
line is what interventions are compared on.
"""

from collections import Counter
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import MissingDataError
from src.core.logger import get_logger
from src.core.types import CheckpointRecord, ConfigId, LossUnit, require_single_unit

logger = get_logger("ingest_grouping")


class Diagnostic(BaseModel):
    """A problem found while reading or checking records."""

    model_config = ConfigDict(frozen=True)

    level: Literal["error", "warning"] = Field(..., description="Severity")
    message: str = Field(..., description="Human-readable description")
    line: Optional[int] = Field(default=None, description="1-based line in the source file")
    field: Optional[str] = Field(default=None, description="Offending field, if known")

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        what = f"[{self.field}] " if self.field else ""
        return f"{self.level}: {where}{what}{self.message}"


class RecordSet(BaseModel):
    """
    Validated checkpoint records from one source.

    Attributes:
        records: Records in source order
        source: File path or "synthetic"
        diagnostics: Malformed lines (errors) and consistency warnings
    """

    model_config = ConfigDict(frozen=True)

    records: Tuple[CheckpointRecord, ...] = Field(default_factory=tuple)
    source: str = Field(default="synthetic")
    diagnostics: Tuple[Diagnostic, ...] = Field(default_factory=tuple)

    @classmethod
    def build(
        cls,
        records: Sequence[CheckpointRecord],
        source: str,
        diagnostics: Sequence[Diagnostic] = (),
    ) -> "RecordSet":
        """Create a record set, appending ragged-coverage and duplicate warnings."""
        found = list(diagnostics) + consistency_diagnostics(records)
        for diagnostic in found:
            if diagnostic.level == "warning":
                logger.warning(f"{source}: {diagnostic}")
        return cls(records=tuple(records), source=source, diagnostics=tuple(found))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def errors(self) -> List[Diagnostic]:
        return [d for d in self.diagnostics if d.level == "error"]

    @property
    def warnings(self) -> List[Diagnostic]:
        return [d for d in self.diagnostics if d.level == "warning"]


def consistency_diagnostics(records: Sequence[CheckpointRecord]) -> List[Diagnostic]:
    """Warnings for ragged dataset coverage within a config and for duplicate checkpoints."""
    found: List[Diagnostic] = []

    labels_by_config: Dict[ConfigId, List[frozenset]] = {}
    for record in records:
        labels_by_config.setdefault(record.config, []).append(frozenset(record.losses))
    for config in sorted(labels_by_config, key=lambda c: c.sort_key):
        label_sets = set(labels_by_config[config])
        if len(label_sets) > 1:
            union = frozenset().union(*label_sets)
            common = frozenset.intersection(*label_sets)
            found.append(
                Diagnostic(
                    level="warning",
                    message=(
                        f"ragged dataset coverage in {config.label}: "
                        f"{sorted(union - common)} missing from some records"
                    ),
                )
            )

    counts = Counter(record.identity for record in records)
    for identity, count in counts.items():
        if count > 1:
            config, n, d, seed, step = identity
            found.append(
                Diagnostic(
                    level="warning",
                    message=(
                        f"{count} records share config={config.label} N={n} D={d} "
                        f"seed={seed} step={step}; kept as separate evaluations"
                    ),
                )
            )
    return found


class ConfigGroup(BaseModel):
    """Records of one configuration. Empty only as the result of filter_group."""

    model_config = ConfigDict(frozen=True)

    config: ConfigId
    records: Tuple[CheckpointRecord, ...] = Field(default_factory=tuple)

    @model_validator(mode="after")
    def _check_members(self) -> "ConfigGroup":
        for record in self.records:
            if record.config != self.config:
                raise ValueError(
                    f"record of {record.config.label} placed in group {self.config.label}"
                )
        return self

    def __len__(self) -> int:
        return len(self.records)

    @property
    def datasets(self) -> List[str]:
        """Dataset labels present in every record."""
        if not self.records:
            return []
        common = set(self.records[0].losses)
        for record in self.records[1:]:
            common &= set(record.losses)
        return [label for label in self.records[0].losses if label in common]

    def unit(self) -> LossUnit:
        return require_single_unit(self.records, what=f"group {self.config.label}")

    def with_dataset(self, dataset: str) -> List[CheckpointRecord]:
        """Records carrying ``dataset``; MissingDataError if none does."""
        members = [r for r in self.records if dataset in r.losses]
        if not members:
            raise MissingDataError([dataset], context=self.config.label)
        return members

    def compute_points(self, dataset: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(N, D, loss) arrays for records carrying ``dataset``."""
        members = self.with_dataset(dataset)
        n = np.array([r.params_n for r in members], dtype=np.float64)
        d = np.array([r.tokens_d for r in members], dtype=np.float64)
        loss = np.array([r.loss(dataset) for r in members], dtype=np.float64)
        return n, d, loss

    def loss_pairs(self, x_dataset: str, y_dataset: str) -> Tuple[np.ndarray, np.ndarray]:
        """(L_x, L_y) arrays for records carrying both datasets."""
        members = [r for r in self.records if x_dataset in r.losses and y_dataset in r.losses]
        if not members:
            missing = [x_dataset, y_dataset]
            raise MissingDataError(missing, context=self.config.label)
        lx = np.array([r.loss(x_dataset) for r in members], dtype=np.float64)
        ly = np.array([r.loss(y_dataset) for r in members], dtype=np.float64)
        return lx, ly


def group_by_config(rs: RecordSet) -> List[ConfigGroup]:
    """
    Partition records by configuration.

    Groups are ordered lexicographically by (pretrain_data, architecture, tokenizer,
    sorted extra items); records keep their source order inside a group.
    """
    buckets: Dict[ConfigId, List[CheckpointRecord]] = {}
    for record in rs.records:
        buckets.setdefault(record.config, []).append(record)
    groups = [
        ConfigGroup(config=config, records=tuple(members))
        for config, members in buckets.items()
    ]
    groups.sort(key=lambda g: g.config.sort_key)
    logger.debug(f"Grouped {len(rs.records)} records into {len(groups)} configurations")
    return groups


RecordPredicate = Callable[[CheckpointRecord], bool]


def filter_group(g: ConfigGroup, predicate: RecordPredicate) -> ConfigGroup:
    """Subset of ``g`` whose records satisfy ``predicate``, order preserved; may be empty."""
    return ConfigGroup(config=g.config, records=tuple(r for r in g.records if predicate(r)))


def checkpoint_predicate(
    min_n: Optional[int] = None,
    max_n: Optional[int] = None,
    min_d: Optional[int] = None,
    max_d: Optional[int] = None,
    seeds: Optional[Sequence[int]] = None,
    min_step: Optional[int] = None,
) -> RecordPredicate:
    """Build a predicate over N, D, seed and step; unset bounds do not filter."""

    def predicate(record: CheckpointRecord) -> bool:
        if min_n is not None and record.params_n < min_n:
            return False
        if max_n is not None and record.params_n > max_n:
            return False
        if min_d is not None and record.tokens_d < min_d:
            return False
        if max_d is not None and record.tokens_d > max_d:
            return False
        if seeds is not None and record.seed not in seeds:
            return False
        if min_step is not None and (record.step is None or record.step < min_step):
            return False
        return True

    return predicate


def harmonize_group(
    g: ConfigGroup,
    unit: Optional[LossUnit] = None,
    averages: Optional[Dict[str, Sequence[str]]] = None,
) -> ConfigGroup:
    """
    Convert every record to ``unit`` and add averaged measurements.

    Conversion happens first, so averages are taken in the target unit.

    Args:
        g: Group to transform
        unit: Target unit; records keep their own unit when None
        averages: New label to the datasets averaged under it; records lacking one of
            the datasets are dropped with a warning

    Raises:
        InvalidArgumentError: If a conversion lacks token or byte counts
    """
    records = [r.converted(unit) if unit is not None else r for r in g.records]
    for label, datasets in (averages or {}).items():
        kept = [r for r in records if all(ds in r.losses for ds in datasets)]
        if len(kept) < len(records):
            logger.warning(
                f"{g.config.label}: {len(records) - len(kept)} records lack one of "
                f"{list(datasets)} and are left out of '{label}'"
            )
        records = [r.with_average(label, datasets) for r in kept]
    return ConfigGroup(config=g.config, records=tuple(records))
