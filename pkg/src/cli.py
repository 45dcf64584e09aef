#!/usr/bin/env python3
"""
Subcommand handlers for the lawline command line.

Each handler takes the parsed arguments, writes its artifacts under ``--out`` and
returns the exit code. Errors propagate to src.main, which maps them to exit codes.
"""
import argparse
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from src.analysis import (
    InterventionMatrix,
    ReportOptions,
    build_report,
    forecast_downstream,
    intervention_matrix,
    write_matrix,
    write_report,
)
from src.core.artifacts import dumps_json, slugify, write_csv, write_json
from src.core.errors import EmptyInputError, InvalidArgumentError, InvalidCompositionError, UsageError
from src.core.logger import get_logger
from src.core.types import LossUnit
from src.fitlaw import GroupFitStatus, LawBundle, fit_groups
from src.ingest import (
    ConfigGroup,
    checkpoint_predicate,
    dump_records,
    filter_group,
    group_by_config,
    harmonize_group,
    load_many,
)
from src.synth import WorldSpec, generate, generate_scenario

logger = get_logger("cli")

X_AVERAGE_LABEL = "x_avg"
Y_AVERAGE_LABEL = "y_avg"
RECORD_SUFFIXES = (".jsonl", ".ndjson", ".csv", ".tsv")
SUMMARY_HEADER = ["config", "x_dataset", "y_dataset", "status", "fallback_used", "r_squared", "reason"]


def split_inputs(paths: Sequence[str]) -> Tuple[List[Path], List[Path]]:
    """Partition input paths into record files and law files (.json)."""
    records: List[Path] = []
    laws: List[Path] = []
    for path in map(Path, paths):
        (records if path.suffix.lower() in RECORD_SUFFIXES else laws).append(path)
    return records, laws


def load_bundles(paths: Sequence[Path]) -> LawBundle:
    bundle = LawBundle()
    for path in paths:
        loaded = LawBundle.from_file(path)
        bundle.compute_to_loss.extend(loaded.compute_to_loss)
        bundle.loss_to_loss.extend(loaded.loss_to_loss)
        logger.debug(f"Loaded {len(loaded.loss_to_loss)} loss-to-loss laws from {path}")
    return bundle


def dataset_selection(args: argparse.Namespace) -> Tuple[str, List[str], Dict[str, List[str]]]:
    """
    Resolve the x label, y labels and averaged measurements from the dataset flags.

    With --average, several x (or y) datasets are averaged into one label per side.
    """
    xs = list(args.x_dataset or [])
    ys = list(args.y_datasets or [])
    if not xs:
        raise UsageError("--x-dataset is required")
    averages: Dict[str, List[str]] = {}
    if len(xs) > 1:
        if not args.average:
            raise UsageError("Several x datasets need --average")
        averages[X_AVERAGE_LABEL] = xs
        x_label = X_AVERAGE_LABEL
    else:
        x_label = xs[0]
    if args.average and len(ys) > 1:
        averages[Y_AVERAGE_LABEL] = ys
        y_labels = [Y_AVERAGE_LABEL]
    else:
        y_labels = ys
    return x_label, y_labels, averages


def prepared_groups(
    record_paths: Sequence[Path], args: argparse.Namespace, averages: Optional[Dict[str, List[str]]] = None
) -> List[ConfigGroup]:
    """Load, filter, convert and average records; empty groups are dropped."""
    rs = load_many(record_paths, args.format)
    predicate = checkpoint_predicate(min_n=args.min_n, max_n=args.max_n)
    unit = LossUnit(args.unit) if args.unit else None
    groups = []
    for group in group_by_config(rs):
        group = harmonize_group(filter_group(group, predicate), unit, averages)
        if len(group):
            groups.append(group)
    return groups


def print_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    """Left-aligned plain-text table on stdout."""
    cells = [[_cell(v) for v in row] for row in rows]
    widths = [max([len(h), *(len(r[i]) for r in cells)]) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def _cell(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return ""
    return str(value)


def _r_squared_cell(value: object) -> str:
    return f"{value:.3f}" if isinstance(value, float) else ""


def _summary_rows(statuses: Sequence[GroupFitStatus]) -> List[list]:
    return [
        [
            s.config_label, s.x_dataset, s.y_dataset, s.status, str(s.fallback_used).lower(),
            "" if s.r_squared is None else s.r_squared, s.reason,
        ]
        for s in statuses
    ]


def _write_averages(groups: Sequence[ConfigGroup], labels: Sequence[str], out_dir: Path) -> Path:
    header = ["config", "params_n", "tokens_d", "seed", "step", *labels]
    rows = [
        [g.config.label, r.params_n, r.tokens_d, _cell(r.seed), _cell(r.step), *(r.loss(label) for label in labels)]
        for g in groups
        for r in g.records
    ]
    return write_csv(out_dir / "averages.csv", header, rows)


def cmd_fit(args: argparse.Namespace) -> int:
    """
    Fit both stages for every configuration and write laws.json, one JSON file per
    law under laws/, and fit_summary.csv. Exit 2 when no loss-to-loss law could be fitted.
    """
    record_paths, law_paths = split_inputs(args.inputs)
    if law_paths:
        raise UsageError(f"fit reads record files (.jsonl, .csv), got {[str(p) for p in law_paths]}")
    if not args.y_datasets:
        raise UsageError("--y-datasets is required")
    x_label, y_labels, averages = dataset_selection(args)
    groups = prepared_groups(record_paths, args, averages)
    if not groups:
        raise EmptyInputError("No records left after filtering")

    out_dir = Path(args.out)
    if averages:
        _write_averages(groups, list(averages), out_dir)

    bundle, statuses = fit_groups(groups, x_label, y_labels, threads=args.threads, progress=args.verbose)
    bundle.save(out_dir / "laws.json")
    for law in [*bundle.compute_to_loss, *bundle.loss_to_loss]:
        write_json(out_dir / "laws" / f"{slugify(law.law_id)}.json", law.model_dump(mode="json"))
    rows = _summary_rows(statuses)
    write_csv(out_dir / "fit_summary.csv", SUMMARY_HEADER, rows)
    print_table(SUMMARY_HEADER[:-1], [[*row[:5], _r_squared_cell(row[5])] for row in rows])

    if not bundle.loss_to_loss:
        logger.error("No configuration produced a loss-to-loss law; see fit_summary.csv")
        return 2
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    """Intervention matrix per (x, y) pair, from law files and/or freshly fitted records."""
    record_paths, law_paths = split_inputs(args.inputs)
    bundle = load_bundles(law_paths)

    pairs: Optional[List[Tuple[str, str]]] = None
    if args.x_dataset:
        x_label, y_labels, averages = dataset_selection(args)
        if y_labels:
            pairs = [(x_label, y) for y in y_labels]
        if record_paths:
            if not y_labels:
                raise UsageError("Fitting records for compare needs --y-datasets")
            groups = prepared_groups(record_paths, args, averages)
            fitted, _ = fit_groups(groups, x_label, y_labels, threads=args.threads, progress=args.verbose)
            bundle.compute_to_loss.extend(fitted.compute_to_loss)
            bundle.loss_to_loss.extend(fitted.loss_to_loss)
        if pairs is None:
            pairs = [p for p in bundle.pairs() if p[0] == x_label]
    elif record_paths:
        raise UsageError("Comparing record files needs --x-dataset and --y-datasets")
    else:
        pairs = bundle.pairs()

    if not pairs:
        raise InvalidArgumentError("No loss-to-loss laws to compare")

    out_dir = Path(args.out)
    for x_dataset, y_dataset in pairs:
        laws = bundle.for_pair(x_dataset, y_dataset)
        if len(laws) < 2:
            raise InvalidArgumentError(
                f"{x_dataset}->{y_dataset}: comparing needs at least 2 configurations, got {len(laws)}"
            )
        matrix = intervention_matrix([(law.config.label, law) for law in laws], args.interval, args.threads)
        write_matrix(matrix, out_dir)
        header, rows = matrix.table_rows()
        lo, hi = matrix.interval
        print(f"{x_dataset} -> {y_dataset} ({matrix.unit.value}, area on [{lo:g}, {hi:g}])")
        print_table(header, rows)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    """Chain a compute-to-loss law with a loss-to-loss law and write forecast.json."""
    _, law_paths = split_inputs(args.inputs)
    bundle = load_bundles(law_paths)
    candidates = [
        law
        for law in bundle.loss_to_loss
        if (args.config is None or law.config.label == args.config)
        and (args.x_dataset is None or law.x_dataset == args.x_dataset)
        and (args.y_dataset is None or law.y_dataset == args.y_dataset)
    ]
    if len(candidates) != 1:
        ids = [law.law_id for law in candidates]
        raise UsageError(
            f"{len(candidates)} loss-to-loss laws match {ids}; narrow with --config, --x-dataset, --y-dataset"
        )
    l2l = candidates[0]
    train_law = bundle.compute_law(l2l.config, l2l.x_dataset)
    if train_law is None:
        raise InvalidCompositionError(f"No compute-to-loss law for {l2l.config.label}/{l2l.x_dataset}")

    forecast = forecast_downstream(train_law, l2l, args.params_n, args.tokens_d)
    payload = forecast.model_dump(mode="json")
    write_json(Path(args.out) / "forecast.json", payload)
    print(dumps_json(payload), end="")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    """Generate records from a world file, plus one intervened world per --intervention."""
    spec = WorldSpec.from_file(args.world)
    if args.intervention:
        rs = generate_scenario(spec, args.intervention, args.seed, args.threads)
    else:
        rs = generate(spec, args.seed, args.threads)
    path = dump_records(rs, Path(args.out) / "records.jsonl")
    print(f"{len(rs)} records -> {path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """Report JSON, law tables, curve samples, matrices and SVG plots from saved artifacts."""
    record_paths, law_paths = split_inputs(args.inputs)
    bundle = load_bundles(law_paths)
    matrices = [InterventionMatrix.model_validate_json(Path(p).read_text(encoding="utf-8")) for p in args.matrix or []]

    pairs: Optional[List[Tuple[str, str]]] = None
    averages: Dict[str, List[str]] = {}
    if args.x_dataset:
        x_label, y_labels, averages = dataset_selection(args)
        if y_labels:
            pairs = [(x_label, y) for y in y_labels]
    groups = prepared_groups(record_paths, args, averages) if record_paths else []

    if not args.matrix:
        for x_dataset, y_dataset in pairs or bundle.pairs():
            laws = bundle.for_pair(x_dataset, y_dataset)
            if len(laws) >= 2:
                named = [(law.config.label, law) for law in laws]
                matrices.append(intervention_matrix(named, args.interval, args.threads))

    options = ReportOptions(interval=args.interval, subsample=args.subsample, seed=args.seed, pairs=pairs)
    report = build_report(groups, bundle, matrices, options)
    written = write_report(report, Path(args.out))
    print(f"{len(written)} report files -> {args.out}")
    return 0
