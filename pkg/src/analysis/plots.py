"""
Static SVG rendering of loss-to-loss figures and area heatmaps.

Figures are built on the object-oriented matplotlib API (no pyplot state), and
SVGs are written with a fixed hash salt and no date, so identical reports give
byte-identical files.
"""

import io
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from src.core.settings import SVG_HASH_SALT  # noqa: E402

if TYPE_CHECKING:
    from src.analysis.intervention import InterventionMatrix
    from src.analysis.report import Report

SVG_RC = {
    "svg.hashsalt": SVG_HASH_SALT,
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
}


def _svg_bytes(fig: Figure) -> bytes:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None}, bbox_inches="tight")
    return buffer.getvalue()


def render_loss_to_loss_svg(report: "Report", x_dataset: str, y_dataset: str) -> bytes:
    """Fitted curves and observed points for one (x, y) pair, one colour per configuration."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.0, 4.5))
        ax = fig.add_subplot(1, 1, 1)
        colours = {}
        cycle = matplotlib.rcParams["axes.prop_cycle"].by_key()["color"]

        def colour(label: str) -> str:
            if label not in colours:
                colours[label] = cycle[len(colours) % len(cycle)]
            return colours[label]

        for curve in report.curves:
            if (curve.x_dataset, curve.y_dataset) != (x_dataset, y_dataset):
                continue
            ax.plot(curve.x, curve.y, color=colour(curve.config_label), linewidth=1.5, label=curve.config_label)
        for points in report.scatter:
            if (points.x_dataset, points.y_dataset) != (x_dataset, y_dataset):
                continue
            label = points.config_label if points.status == "scatter_only" else None
            ax.scatter(
                points.x,
                points.y,
                s=8,
                alpha=0.5,
                color=colour(points.config_label),
                marker="o" if points.status == "fitted" else "x",
                label=f"{label} (no fit)" if label else None,
            )

        unit = _unit_for(report, x_dataset, y_dataset)
        ax.set_xlabel(f"{x_dataset} loss ({unit})")
        ax.set_ylabel(f"{y_dataset} loss ({unit})")
        ax.set_title(f"{x_dataset} -> {y_dataset}")
        if colours:
            ax.legend(fontsize=7, frameon=False)
        return _svg_bytes(fig)


def _unit_for(report: "Report", x_dataset: str, y_dataset: str) -> str:
    for law in report.loss_to_loss:
        if (law.x_dataset, law.y_dataset) == (x_dataset, y_dataset):
            return law.unit.value
    return "loss"


def render_matrix_svg(matrix: "InterventionMatrix") -> bytes:
    """Annotated heatmap of an intervention matrix."""
    size = len(matrix.labels)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(1.2 * size + 2.5, 1.0 * size + 1.5))
        ax = fig.add_subplot(1, 1, 1)
        peak = max(max(row) for row in matrix.areas) or 1.0
        image = ax.imshow(matrix.areas, cmap="viridis", vmin=0.0, vmax=peak)
        ax.set_xticks(range(size))
        ax.set_yticks(range(size))
        ax.set_xticklabels(matrix.labels, rotation=45, ha="right")
        ax.set_yticklabels(matrix.labels)
        for i in range(size):
            for j in range(size):
                value = matrix.areas[i][j]
                ax.text(
                    j, i, f"{value:.2f}", ha="center", va="center",
                    color="white" if value < 0.5 * peak else "black", fontsize=8,
                )
        lo, hi = matrix.interval
        ax.set_title(f"Area between {matrix.x_dataset} -> {matrix.y_dataset} curves on [{lo:g}, {hi:g}]")
        fig.colorbar(image, ax=ax)
        return _svg_bytes(fig)
