"""
Intervention effect as the area between two fitted loss-to-loss curves.

Each curve is evaluated with predict_y, so below its E_x it is flat at E_y and the
integrand is defined on any interval. The interval is cut at both E_x kinks and at
every crossing of the curves; on each piece the difference keeps one sign and is
integrated with QUADPACK.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import quad
from scipy.optimize import brentq

from src.core.errors import InvalidArgumentError, UnitMismatchError
from src.core.logger import get_logger
from src.core.settings import AREA_ABS_TOL, CROSSING_SCAN_POINTS, DEFAULT_INTERVAL, THREADS
from src.core.types import LossUnit
from src.fitlaw.laws import LossToLossLaw, predict_y

logger = get_logger("intervention")

Interval = Tuple[float, float]


def _check_interval(interval: Interval) -> Interval:
    lo, hi = (float(v) for v in interval)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise InvalidArgumentError(f"Interval must satisfy lo < hi, got ({lo}, {hi})")
    return lo, hi


def _crossings(diff, lo: float, hi: float) -> List[float]:
    """Points in (lo, hi) where diff changes sign, located by a grid scan and brentq."""
    grid = np.linspace(lo, hi, CROSSING_SCAN_POINTS)
    values = np.array([diff(x) for x in grid])
    found: List[float] = []
    for i in range(len(grid) - 1):
        left, right = values[i], values[i + 1]
        if left == 0.0 and 0 < i:
            found.append(float(grid[i]))
        elif left * right < 0.0:
            found.append(float(brentq(diff, grid[i], grid[i + 1], xtol=1e-14)))
    return found


def area_between(law_a: LossToLossLaw, law_b: LossToLossLaw, interval: Interval = DEFAULT_INTERVAL) -> float:
    """
    L1 distance between two loss-to-loss curves on ``interval``.

    Args:
        law_a: First law
        law_b: Second law
        interval: (lo, hi) on the x-loss axis

    Returns:
        float: Integral of |y_a(x) - y_b(x)| over the interval, to about 1e-8 absolute.

    Raises:
        UnitMismatchError: If the laws are expressed in different units
        InvalidArgumentError: If lo >= hi
    """
    if law_a.unit != law_b.unit:
        raise UnitMismatchError(
            f"Cannot compare {law_a.law_id} ({law_a.unit.value}) with {law_b.law_id} ({law_b.unit.value})"
        )
    if (law_a.x_dataset, law_a.y_dataset) != (law_b.x_dataset, law_b.y_dataset):
        logger.warning(
            f"Comparing curves over different datasets: {law_a.x_dataset}->{law_a.y_dataset} "
            f"vs {law_b.x_dataset}->{law_b.y_dataset}"
        )
    lo, hi = _check_interval(interval)
    curve = ("k_coef", "kappa", "e_x", "e_y")
    if all(getattr(law_a, f) == getattr(law_b, f) for f in curve):
        return 0.0

    def diff(x: float) -> float:
        return predict_y(law_a, x) - predict_y(law_b, x)

    kinks = sorted({e for e in (law_a.e_x, law_b.e_x) if lo < e < hi})
    edges = [lo, *kinks, hi]
    breaks = [lo]
    for a, b in zip(edges[:-1], edges[1:]):
        breaks.extend(_crossings(diff, a, b))
        breaks.append(b)

    panels = [(a, b) for a, b in zip(breaks[:-1], breaks[1:]) if b > a]
    tolerance = AREA_ABS_TOL / max(len(panels), 1)
    total = 0.0
    for a, b in panels:
        value, _ = quad(diff, a, b, epsabs=tolerance, epsrel=0.0, limit=200)
        total += abs(value)
    return total


class InterventionMatrix(BaseModel):
    """
    Pairwise areas between the loss-to-loss curves of several configurations.

    Attributes:
        labels: Configuration names in input order
        areas: Symmetric matrix with a zero diagonal, areas[i][j] between labels i and j
        interval: x-range the areas were taken over
        x_dataset: x-axis dataset of the compared curves
        y_dataset: y-axis dataset of the compared curves
        unit: Unit of both axes
    """

    model_config = ConfigDict(frozen=True)

    labels: List[str] = Field(..., min_length=2)
    areas: List[List[float]]
    interval: Tuple[float, float] = DEFAULT_INTERVAL
    x_dataset: str
    y_dataset: str
    unit: LossUnit

    @model_validator(mode="after")
    def _check_matrix(self) -> "InterventionMatrix":
        size = len(self.labels)
        if len(self.areas) != size or any(len(row) != size for row in self.areas):
            raise ValueError(f"areas must be {size}x{size}")
        for i in range(size):
            if self.areas[i][i] != 0.0:
                raise ValueError(f"diagonal entry {i} is {self.areas[i][i]}, expected 0")
            for j in range(size):
                value = self.areas[i][j]
                if not math.isfinite(value) or value < 0.0:
                    raise ValueError(f"areas[{i}][{j}] = {value} is not a finite non-negative number")
                if value != self.areas[j][i]:
                    raise ValueError(f"areas is not symmetric at ({i}, {j})")
        if not self.interval[0] < self.interval[1]:
            raise ValueError(f"interval {self.interval} is empty")
        return self

    def area(self, a: str, b: str) -> float:
        return self.areas[self.labels.index(a)][self.labels.index(b)]

    def table_rows(self) -> Tuple[List[str], List[List[Any]]]:
        """Square table: header row of labels, one row per label."""
        header = ["", *self.labels]
        rows = [[label, *row] for label, row in zip(self.labels, self.areas)]
        return header, rows

    def long_rows(self) -> Tuple[List[str], List[List[Any]]]:
        """Heatmap-ready long form: one (row, column, area) line per cell."""
        header = ["row", "column", "area"]
        rows = [
            [a, b, self.areas[i][j]]
            for i, a in enumerate(self.labels)
            for j, b in enumerate(self.labels)
        ]
        return header, rows


def intervention_matrix(
    laws: Sequence[Tuple[str, LossToLossLaw]],
    interval: Interval = DEFAULT_INTERVAL,
    threads: int = THREADS,
) -> InterventionMatrix:
    """
    Area between every pair of named loss-to-loss laws.

    Only the upper triangle is computed; it is mirrored, and the diagonal is zero
    by construction. Pairs are independent and run on up to ``threads`` workers.

    Raises:
        InvalidArgumentError: With fewer than 2 laws, repeated names or lo >= hi
        UnitMismatchError: If two laws carry different units
    """
    if len(laws) < 2:
        raise InvalidArgumentError(f"An intervention matrix needs at least 2 laws, got {len(laws)}")
    labels = [name for name, _ in laws]
    if len(set(labels)) != len(labels):
        raise InvalidArgumentError(f"Law names must be unique: {labels}")
    lo, hi = _check_interval(interval)
    units = {law.unit for _, law in laws}
    if len(units) > 1:
        raise UnitMismatchError(f"Laws in one matrix must share a unit: {sorted(u.value for u in units)}")

    size = len(laws)
    pairs = [(i, j) for i in range(size) for j in range(i + 1, size)]

    def pair_area(pair: Tuple[int, int]) -> float:
        i, j = pair
        return area_between(laws[i][1], laws[j][1], (lo, hi))

    workers = max(1, min(threads, len(pairs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        values = list(pool.map(pair_area, pairs))

    areas = [[0.0] * size for _ in range(size)]
    for (i, j), value in zip(pairs, values):
        areas[i][j] = areas[j][i] = value

    first = laws[0][1]
    logger.info(f"Computed {len(pairs)} pairwise areas on [{lo}, {hi}] for {size} laws")
    return InterventionMatrix(
        labels=labels,
        areas=areas,
        interval=(lo, hi),
        x_dataset=first.x_dataset,
        y_dataset=first.y_dataset,
        unit=first.unit,
    )
