"""
Report assembly and writing.

A report is a plain data object built only from record groups, serialized laws and
matrices, so ``report`` never depends on state left behind by ``fit``.
"""

from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from src.core.artifacts import atomic_write_bytes, render_csv, slugify, write_csv, write_json
from src.core.errors import MissingDataError
from src.core.logger import get_logger
from src.core.settings import CURVE_SAMPLES, DEFAULT_INTERVAL
from src.fitlaw.laws import ComputeToLossLaw, LawBundle, LossToLossLaw, predict_y
from src.ingest.grouping import ConfigGroup
from src.analysis.intervention import InterventionMatrix
from src.analysis.plots import render_loss_to_loss_svg, render_matrix_svg

logger = get_logger("report")

CLAMP_NOTE = (
    "Loss-to-loss curves are extended below E_x as the constant E_y; curve samples and "
    "areas over x < E_x use this extension."
)
NOISE_NOTE = (
    "Checkpoint losses are treated as independent observations; correlation along one "
    "training run is not modelled."
)


def curve_samples(law: LossToLossLaw, lo: float, hi: float, n: int = CURVE_SAMPLES) -> Tuple[np.ndarray, np.ndarray]:
    """``n`` evenly spaced (x, predict_y(x)) samples on [lo, hi]."""
    xs = np.linspace(lo, hi, n)
    return xs, predict_y(law, xs)


def subsample_points(
    points: Tuple[ArrayLike, ArrayLike], k: Optional[int], seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded random subset of min(k, n) points, in their original order.

    ``k=None`` keeps every point. Only plots are subsampled; fits always use all points.
    """
    xs = np.asarray(points[0], dtype=np.float64)
    ys = np.asarray(points[1], dtype=np.float64)
    if k is None or k >= xs.size:
        return xs, ys
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(xs.size, size=max(k, 0), replace=False))
    return xs[keep], ys[keep]


class CurveSamples(BaseModel):
    model_config = ConfigDict(frozen=True)

    law_id: str
    config_label: str
    x_dataset: str
    y_dataset: str
    x: List[float]
    y: List[float]


class ScatterSamples(BaseModel):
    """Observed (L_x, L_y) points of one group, possibly subsampled."""

    model_config = ConfigDict(frozen=True)

    config_label: str
    x_dataset: str
    y_dataset: str
    status: Literal["fitted", "scatter_only"]
    n_total: int = Field(..., ge=0)
    x: List[float]
    y: List[float]


class ReportOptions(BaseModel):
    interval: Tuple[float, float] = DEFAULT_INTERVAL
    n_samples: int = Field(default=CURVE_SAMPLES, ge=2)
    subsample: Optional[int] = Field(default=None, ge=0, description="Scatter points kept per group")
    seed: int = 0
    pairs: Optional[List[Tuple[str, str]]] = Field(
        default=None, description="(x, y) dataset pairs to show; defaults to the fitted pairs"
    )


class Report(BaseModel):
    """Everything needed to render the loss-to-loss figures and the area tables."""

    compute_to_loss: List[ComputeToLossLaw] = Field(default_factory=list)
    loss_to_loss: List[LossToLossLaw] = Field(default_factory=list)
    matrices: List[InterventionMatrix] = Field(default_factory=list)
    curves: List[CurveSamples] = Field(default_factory=list)
    scatter: List[ScatterSamples] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def pairs(self) -> List[Tuple[str, str]]:
        seen: List[Tuple[str, str]] = []
        for item in [*self.curves, *self.scatter]:
            key = (item.x_dataset, item.y_dataset)
            if key not in seen:
                seen.append(key)
        return seen


def build_report(
    groups: Sequence[ConfigGroup],
    laws: LawBundle,
    matrices: Sequence[InterventionMatrix] = (),
    options: Optional[ReportOptions] = None,
) -> Report:
    """
    Assemble the report tables and plot samples.

    Curves span the comparison interval widened to the observed x range of their
    group. Groups carrying a pair's datasets without a law for it are included as
    scatter-only.

    Args:
        groups: Record groups providing the scatter points (may be empty)
        laws: Fitted laws
        matrices: Intervention matrices, reproduced verbatim
        options: Interval, sample counts and scatter subsampling

    Returns:
        Report: Deterministic for identical inputs and seed.
    """
    options = options or ReportOptions()
    lo, hi = options.interval
    pairs = options.pairs if options.pairs is not None else laws.pairs()

    curves: List[CurveSamples] = []
    scatter: List[ScatterSamples] = []
    for x_dataset, y_dataset in pairs:
        fitted = {law.config: law for law in laws.for_pair(x_dataset, y_dataset)}
        observed = {}
        for group in groups:
            try:
                observed[group.config] = group.loss_pairs(x_dataset, y_dataset)
            except MissingDataError:
                continue

        for law in fitted.values():
            span_lo, span_hi = lo, hi
            if law.config in observed:
                span_lo = min(lo, float(observed[law.config][0].min()))
                span_hi = max(hi, float(observed[law.config][0].max()))
            xs, ys = curve_samples(law, span_lo, span_hi, options.n_samples)
            curves.append(
                CurveSamples(
                    law_id=law.law_id,
                    config_label=law.config.label,
                    x_dataset=x_dataset,
                    y_dataset=y_dataset,
                    x=xs.tolist(),
                    y=ys.tolist(),
                )
            )

        for config, (lx, ly) in observed.items():
            sx, sy = subsample_points((lx, ly), options.subsample, options.seed)
            scatter.append(
                ScatterSamples(
                    config_label=config.label,
                    x_dataset=x_dataset,
                    y_dataset=y_dataset,
                    status="fitted" if config in fitted else "scatter_only",
                    n_total=int(lx.size),
                    x=sx.tolist(),
                    y=sy.tolist(),
                )
            )

    notes = [CLAMP_NOTE, NOISE_NOTE]
    if options.subsample is not None:
        notes.append(f"Scatter plots show at most {options.subsample} points per group; fits use all points.")

    logger.info(f"Report: {len(curves)} curves, {len(scatter)} scatter sets, {len(matrices)} matrices")
    return Report(
        compute_to_loss=list(laws.compute_to_loss),
        loss_to_loss=list(laws.loss_to_loss),
        matrices=list(matrices),
        curves=curves,
        scatter=scatter,
        notes=notes,
    )


C2L_HEADER = ["law_id", "config", "dataset", "unit", "E", "A", "B", "alpha", "beta", "fallback_used", "sse", "n_points"]
L2L_HEADER = ["law_id", "config", "x_dataset", "y_dataset", "unit", "K", "kappa", "E_x", "E_y", "r_squared", "n_points"]


def compute_to_loss_rows(laws: Sequence[ComputeToLossLaw]) -> List[list]:
    return [
        [
            law.law_id, law.config.label, law.eval_dataset, law.unit.value, law.e_irreducible,
            _blank(law.a_coef), _blank(law.b_coef), _blank(law.alpha), _blank(law.beta),
            str(law.fallback_used).lower(), law.sse, law.n_points,
        ]
        for law in laws
    ]


def loss_to_loss_rows(laws: Sequence[LossToLossLaw]) -> List[list]:
    return [
        [
            law.law_id, law.config.label, law.x_dataset, law.y_dataset, law.unit.value,
            law.k_coef, law.kappa, law.e_x, law.e_y, law.r_squared, law.n_points,
        ]
        for law in laws
    ]


def _blank(value: Optional[float]) -> Union[float, str]:
    return "" if value is None else value


def matrix_stem(matrix: InterventionMatrix) -> str:
    return f"matrix__{slugify(matrix.x_dataset)}__{slugify(matrix.y_dataset)}"


def write_matrix(matrix: InterventionMatrix, out_dir: Union[str, Path]) -> List[Path]:
    """Square CSV, long-form heatmap CSV and JSON of one matrix."""
    out_dir = Path(out_dir)
    stem = matrix_stem(matrix)
    header, rows = matrix.table_rows()
    long_header, long_rows = matrix.long_rows()
    return [
        write_csv(out_dir / f"{stem}.csv", header, rows),
        write_csv(out_dir / f"{stem}__long.csv", long_header, long_rows),
        write_json(out_dir / f"{stem}.json", matrix.model_dump(mode="json")),
    ]


def write_report(report: Report, out_dir: Union[str, Path], plots: bool = True) -> List[Path]:
    """
    Write report.json, the law tables, per-curve sample CSVs, matrices and SVG plots.

    Returns:
        List[Path]: Files written, in write order.
    """
    out_dir = Path(out_dir)
    written = [
        write_json(out_dir / "report.json", report.model_dump(mode="json")),
        write_csv(out_dir / "compute_to_loss.csv", C2L_HEADER, compute_to_loss_rows(report.compute_to_loss)),
        write_csv(out_dir / "loss_to_loss.csv", L2L_HEADER, loss_to_loss_rows(report.loss_to_loss)),
    ]
    for curve in report.curves:
        text = render_csv(["x", "y"], zip(curve.x, curve.y))
        name = f"curve__{slugify(curve.config_label)}__{slugify(curve.x_dataset)}__{slugify(curve.y_dataset)}.csv"
        written.append(atomic_write_bytes(out_dir / "curves" / name, text.encode("utf-8")))
    for matrix in report.matrices:
        written.extend(write_matrix(matrix, out_dir))

    if plots:
        for x_dataset, y_dataset in report.pairs():
            svg = render_loss_to_loss_svg(report, x_dataset, y_dataset)
            name = f"loss_to_loss__{slugify(x_dataset)}__{slugify(y_dataset)}.svg"
            written.append(atomic_write_bytes(out_dir / name, svg))
        for matrix in report.matrices:
            written.append(atomic_write_bytes(out_dir / f"{matrix_stem(matrix)}.svg", render_matrix_svg(matrix)))

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
