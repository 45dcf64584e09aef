"""
Checkpoint record file reading and writing.

JSON lines is the canonical format, one record per line:

    {"config": {"pretrain_data": ..., "architecture": ..., "tokenizer": ..., "extra": {...}},
     "params_n": ..., "tokens_d": ..., "seed": ..., "step": ...,
     "losses": {"<label>": {"value": ..., "unit": "nats"|"bpb",
                            "token_count": ..., "byte_count": ...}}}

CSV is a flat view: one row per checkpoint, one column per dataset loss, with the
unit fixed for the whole file by a ``#unit=nats`` or ``#unit=bpb`` directive line.
Malformed lines never abort a load; they are reported as diagnostics.
"""

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from src.core.artifacts import atomic_write_text
from src.core.errors import EmptyInputError, InvalidArgumentError
from src.core.logger import get_logger
from src.core.settings import THREADS
from src.core.types import CheckpointRecord, LossUnit
from src.ingest.grouping import Diagnostic, RecordSet

logger = get_logger("ingest_loader")

PathLike = Union[str, Path]

CONFIG_COLUMNS = ("pretrain_data", "architecture", "tokenizer")
RECORD_COLUMNS = ("params_n", "tokens_d", "seed", "step")
EXTRA_PREFIX = "extra."
COUNT_SUFFIXES = (".token_count", ".byte_count")


class RecordFormat(str, Enum):
    JSONL = "jsonl"
    CSV = "csv"


def detect_format(path: PathLike) -> RecordFormat:
    """Guess the record format from the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return RecordFormat.JSONL
    if suffix in (".csv", ".tsv"):
        return RecordFormat.CSV
    raise InvalidArgumentError(
        f"Cannot infer record format from '{path}'; use .jsonl or .csv or pass a format"
    )


def _validation_diagnostics(err: ValidationError, line: int) -> List[Diagnostic]:
    found = []
    for detail in err.errors():
        loc = ".".join(str(part) for part in detail.get("loc", ()))
        found.append(
            Diagnostic(level="error", line=line, field=loc or None, message=detail.get("msg", str(err)))
        )
    return found


def _parse_jsonl(text: str) -> Tuple[List[CheckpointRecord], List[Diagnostic]]:
    records: List[CheckpointRecord] = []
    diagnostics: List[Diagnostic] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            diagnostics.append(Diagnostic(level="error", line=line_no, message=f"invalid JSON: {e.msg}"))
            continue
        if not isinstance(payload, dict):
            diagnostics.append(Diagnostic(level="error", line=line_no, message="record must be a JSON object"))
            continue
        try:
            records.append(CheckpointRecord.model_validate(payload))
        except ValidationError as e:
            diagnostics.extend(_validation_diagnostics(e, line_no))
    return records, diagnostics


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"not an integer: {raw!r}")
        return int(value)


def _csv_row_payload(row: Dict[str, str], unit: LossUnit) -> Dict[str, Any]:
    """Turn one flat CSV row into the canonical record payload."""
    config: Dict[str, Any] = {"extra": {}}
    payload: Dict[str, Any] = {"config": config, "losses": {}}
    counts: Dict[str, Dict[str, int]] = {}

    for column, raw in row.items():
        if column is None:
            raise ValueError("row has more cells than the header")
        raw = (raw or "").strip()
        if column in CONFIG_COLUMNS:
            config[column] = raw
        elif column.startswith(EXTRA_PREFIX):
            if raw:
                config["extra"][column[len(EXTRA_PREFIX):]] = raw
        elif column in RECORD_COLUMNS:
            payload[column] = _parse_int(raw) if raw else None
        elif column.endswith(COUNT_SUFFIXES):
            if raw:
                label, _, kind = column.rpartition(".")
                counts.setdefault(label, {})[kind] = _parse_int(raw)
        elif raw:
            payload["losses"][column] = {"value": float(raw), "unit": unit.value}

    for label, label_counts in counts.items():
        if label in payload["losses"]:
            payload["losses"][label].update(label_counts)
    return payload


def _parse_csv(text: str) -> Tuple[List[CheckpointRecord], List[Diagnostic]]:
    records: List[CheckpointRecord] = []
    diagnostics: List[Diagnostic] = []

    lines = text.splitlines()
    unit: Optional[LossUnit] = None
    first_data = 0
    for index, line in enumerate(lines):
        stripped = line.strip()
        if not stripped.startswith("#"):
            first_data = index
            break
        key, _, value = stripped[1:].partition("=")
        if key.strip() == "unit":
            try:
                unit = LossUnit(value.strip())
            except ValueError:
                diagnostics.append(
                    Diagnostic(level="error", line=index + 1, field="#unit", message=f"unknown unit {value.strip()!r}")
                )
    else:
        first_data = len(lines)

    if unit is None:
        unit = LossUnit.NATS_PER_TOKEN
        diagnostics.append(
            Diagnostic(level="warning", line=1, field="#unit", message="no #unit= directive; assuming nats")
        )

    reader = csv.DictReader(io.StringIO("\n".join(lines[first_data:])))
    for row in reader:
        # reader.line_num counts from the header line
        line_no = first_data + reader.line_num
        if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
            continue
        try:
            payload = _csv_row_payload(row, unit)
        except ValueError as e:
            diagnostics.append(Diagnostic(level="error", line=line_no, message=str(e)))
            continue
        try:
            records.append(CheckpointRecord.model_validate(payload))
        except ValidationError as e:
            diagnostics.extend(_validation_diagnostics(e, line_no))
    return records, diagnostics


def load_records(path: PathLike, format: Optional[RecordFormat] = None) -> RecordSet:
    """
    Load checkpoint records from a JSON-lines or CSV file.

    Args:
        path: File to read (UTF-8).
        format: Record format; inferred from the suffix when None.

    Returns:
        RecordSet: All valid records in file order, with diagnostics for every
        malformed line (error level) and for ragged or duplicate records (warning level).

    Raises:
        OSError: If the file cannot be read.
        EmptyInputError: If no line produced a valid record. The diagnostics are
            attached to the exception.
    """
    path = Path(path)
    fmt = RecordFormat(format) if format is not None else detect_format(path)
    text = path.read_text(encoding="utf-8")

    if fmt == RecordFormat.JSONL:
        records, diagnostics = _parse_jsonl(text)
    else:
        records, diagnostics = _parse_csv(text)

    for diagnostic in diagnostics:
        if diagnostic.level == "error":
            logger.warning(f"{path}: {diagnostic}")

    if not records:
        raise EmptyInputError(f"No valid records in {path}", diagnostics=diagnostics)

    logger.info(f"Loaded {len(records)} records from {path} ({len(diagnostics)} diagnostics)")
    return RecordSet.build(records, source=str(path), diagnostics=diagnostics)


def load_many(paths: Sequence[PathLike], format: Optional[RecordFormat] = None) -> RecordSet:
    """Load several files in parallel and concatenate them in the given order."""
    if not paths:
        raise EmptyInputError("No record files given")
    workers = max(1, min(THREADS, len(paths)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        sets = list(pool.map(lambda p: load_records(p, format), paths))
    if len(sets) == 1:
        return sets[0]
    records = [r for s in sets for r in s.records]
    # Per-file diagnostics keep their line numbers; cross-file checks are redone
    diagnostics = [d for s in sets for d in s.diagnostics if d.level == "error"]
    return RecordSet.build(records, source="+".join(s.source for s in sets), diagnostics=diagnostics)


def dumps_records(rs: RecordSet) -> str:
    """Canonical JSON-lines text for a record set."""
    return "".join(
        json.dumps(record.to_json_dict(), ensure_ascii=False, separators=(",", ":")) + "\n"
        for record in rs.records
    )


def dump_records(rs: RecordSet, path: PathLike) -> Path:
    """Write ``rs`` as canonical JSON lines, atomically."""
    return atomic_write_text(path, dumps_records(rs))
