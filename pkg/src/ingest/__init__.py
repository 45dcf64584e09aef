"""
Record ingestion module for lawline.
"""

from src.ingest.grouping import (
    Diagnostic,
    RecordSet,
    ConfigGroup,
    group_by_config,
    filter_group,
    checkpoint_predicate,
    harmonize_group,
)
from src.ingest.loader import (
    RecordFormat,
    detect_format,
    load_records,
    load_many,
    dump_records,
    dumps_records,
)

__all__ = [
    "Diagnostic",
    "RecordSet",
    "ConfigGroup",
    "group_by_config",
    "filter_group",
    "checkpoint_predicate",
    "harmonize_group",
    "RecordFormat",
    "detect_format",
    "load_records",
    "load_many",
    "dump_records",
    "dumps_records",
]
