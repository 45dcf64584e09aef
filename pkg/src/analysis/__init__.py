"""
Intervention comparison, forecasting and reporting module for lawline.
"""

from src.analysis.intervention import InterventionMatrix, area_between, intervention_matrix
from src.analysis.forecast import DownstreamForecast, check_composable, forecast_downstream
from src.analysis.report import (
    CurveSamples,
    ScatterSamples,
    Report,
    ReportOptions,
    build_report,
    curve_samples,
    subsample_points,
    write_matrix,
    write_report,
)

__all__ = [
    "InterventionMatrix",
    "area_between",
    "intervention_matrix",
    "DownstreamForecast",
    "check_composable",
    "forecast_downstream",
    "CurveSamples",
    "ScatterSamples",
    "Report",
    "ReportOptions",
    "build_report",
    "curve_samples",
    "subsample_points",
    "write_matrix",
    "write_report",
]
