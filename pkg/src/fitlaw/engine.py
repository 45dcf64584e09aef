"""
Multi-start bounded nonlinear least squares.

Each start is refined by scipy's trust-region reflective solver (a damped
Gauss-Newton method that increases damping when the residual grows); the best
start wins. Ties are broken by the lexicographically smaller parameter vector,
so identical inputs always give bit-identical parameters.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import least_squares

from src.core.errors import ConvergenceError, InvalidArgumentError, UnderdeterminedError
from src.core.logger import get_logger
from src.core.settings import FTOL, GTOL, MAX_ITERATIONS, XTOL

logger = get_logger("fit_engine")

Model = Callable[[np.ndarray, np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FitDiagnostics(BaseModel):
    """How the optimizer got to the returned parameters."""

    model_config = ConfigDict(frozen=True)

    iterations: int = Field(..., ge=0, description="Jacobian evaluations of the winning start")
    converged: bool = Field(..., description="A tolerance criterion stopped the winning start")
    sse: float = Field(..., ge=0.0, description="Sum of squared residuals at the solution")
    grad_norm: float = Field(..., ge=0.0, description="Projected gradient max-norm at the solution")
    n_starts_tried: int = Field(..., ge=0, description="Starts inside the bounds")
    best_start_index: int = Field(..., ge=0, description="Index of the winning start in the input list")
    message: str = Field(default="", description="Solver termination message")


def _check_bounds(bounds: Sequence[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    if np.any(~(lo < hi)):
        bad = [i for i in range(len(bounds)) if not lo[i] < hi[i]]
        raise InvalidArgumentError(f"Degenerate bounds for parameter(s) {bad}: {list(bounds)}")
    return lo, hi


def nlls_fit(
    model: Model,
    inputs: np.ndarray,
    targets: np.ndarray,
    bounds: Sequence[Tuple[float, float]],
    starts: Sequence[Sequence[float]],
    jac: Optional[Jacobian] = None,
    max_iterations: int = MAX_ITERATIONS,
) -> Tuple[np.ndarray, FitDiagnostics]:
    """
    Minimize sum((targets - model(params, inputs))**2) over all starts.

    Args:
        model: ``model(params, inputs) -> predictions`` with one prediction per target
        inputs: Model inputs, passed through unchanged
        targets: Observed values, shape (n,)
        bounds: (lower, upper) per parameter; lower < upper
        starts: Initial parameter vectors; those outside the bounds are skipped
        jac: Optional analytic Jacobian of the model, shape (n, p); central
            differences are used otherwise
        max_iterations: Function evaluation cap per start

    Returns:
        Tuple[np.ndarray, FitDiagnostics]: Best parameters (inside the bounds) and
        how they were found.

    Raises:
        UnderdeterminedError: If there are fewer than len(bounds) + 1 targets
        InvalidArgumentError: On degenerate bounds or when no start lies inside them
        ConvergenceError: If every start produced non-finite residuals
    """
    targets = np.asarray(targets, dtype=np.float64).ravel()
    lo, hi = _check_bounds(bounds)
    n_params = len(lo)
    if targets.size < n_params + 1:
        raise UnderdeterminedError(
            f"{targets.size} data points cannot determine {n_params} parameters (need {n_params + 1})"
        )

    candidates: List[Tuple[int, np.ndarray]] = []
    for index, start in enumerate(starts):
        x0 = np.asarray(start, dtype=np.float64)
        if x0.shape != (n_params,):
            raise InvalidArgumentError(f"Start {index} has shape {x0.shape}, expected ({n_params},)")
        if np.all(np.isfinite(x0)) and np.all(x0 >= lo) and np.all(x0 <= hi):
            candidates.append((index, x0))
    if not candidates:
        raise InvalidArgumentError("No start lies inside the bounds")

    def residuals(params: np.ndarray) -> np.ndarray:
        return model(params, inputs) - targets

    jac_fn = (lambda params: jac(params, inputs)) if jac is not None else "3-point"

    best: Optional[Tuple[float, Tuple[float, ...], int, object]] = None
    failures = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        for index, x0 in candidates:
            if not np.all(np.isfinite(residuals(x0))):
                failures += 1
                logger.debug(f"Start {index} has non-finite residuals, skipped")
                continue
            try:
                result = least_squares(
                    residuals,
                    x0,
                    jac=jac_fn,
                    bounds=(lo, hi),
                    method="trf",
                    x_scale="jac",
                    ftol=FTOL,
                    xtol=XTOL,
                    gtol=GTOL,
                    max_nfev=max_iterations,
                )
            except (ValueError, np.linalg.LinAlgError) as e:
                failures += 1
                logger.debug(f"Start {index} failed: {e}")
                continue

            params = np.clip(result.x, lo, hi)
            final = residuals(params)
            if not np.all(np.isfinite(final)):
                failures += 1
                continue
            sse = float(np.dot(final, final))
            key = (sse, tuple(float(p) for p in params), index, result)
            if best is None or key[:2] < best[:2]:
                best = key

    if best is None:
        raise ConvergenceError(f"All {len(candidates)} starts produced non-finite residuals")

    sse, params_tuple, index, result = best
    diagnostics = FitDiagnostics(
        iterations=int(result.njev or result.nfev),
        converged=bool(result.status > 0),
        sse=sse,
        grad_norm=float(result.optimality),
        n_starts_tried=len(candidates),
        best_start_index=index,
        message=str(result.message),
    )
    logger.debug(
        f"nlls_fit: {len(candidates)} starts ({failures} failed), best #{index} "
        f"sse={sse:.3e} converged={diagnostics.converged}"
    )
    return np.array(params_tuple), diagnostics
