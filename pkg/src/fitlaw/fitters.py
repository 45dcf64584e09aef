"""
Two-stage scaling-law fitting.

Stage 1 fits a compute-to-loss law per dataset to estimate its irreducible error
E; when every record shares one N or one D the minimum observed loss is used
instead. Stage 2 fits K and kappa of the loss-to-loss law with both E's held fixed.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from src.core.errors import (
    InsufficientVariationError,
    InvalidArgumentError,
    LawlineError,
    UnderdeterminedError,
)
from src.core.logger import get_logger
from src.core.settings import (
    C2L_E_FRACTIONS,
    C2L_EXPONENT_MAX,
    C2L_EXPONENT_MIN,
    C2L_EXPONENT_STARTS,
    C2L_LOG_COEF_MIN,
    C2L_MAX_COEF,
    C2L_MIN_POINTS,
    EPS_CLIP,
    L2L_K_MAX,
    L2L_K_MIN,
    L2L_KAPPA_MAX,
    L2L_KAPPA_MIN,
    L2L_KAPPA_STARTS,
    L2L_MIN_POINTS,
    RESIDUAL_CLAMP,
    THREADS,
)
from src.core.types import require_single_unit
from src.fitlaw.engine import nlls_fit
from src.fitlaw.laws import (
    ComputeToLossLaw,
    LawBundle,
    LossToLossLaw,
    compute_to_loss_curve,
    compute_to_loss_jacobian,
    loss_to_loss_curve,
    loss_to_loss_jacobian,
    r_squared,
)
from src.ingest.grouping import ConfigGroup

logger = get_logger("fitters")

LOG_COEF_MAX = float(np.log(C2L_MAX_COEF))


def _compute_to_loss_starts(
    log_n: np.ndarray, log_d: np.ndarray, loss: np.ndarray, bounds: Sequence[Tuple[float, float]]
) -> List[np.ndarray]:
    """
    Start grid over E, alpha and beta with A and B solved from two extreme points.

    At the largest-D point the data term is smallest, so the residual is attributed
    half to the parameter term to solve for A; symmetrically B is solved at the
    largest-N point.
    """
    min_loss = float(loss.min())
    i_a = int(np.argmax(log_d))
    i_b = int(np.argmax(log_n))
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    starts = []
    for fraction, alpha, beta in product(C2L_E_FRACTIONS, C2L_EXPONENT_STARTS, C2L_EXPONENT_STARTS):
        e0 = fraction * min_loss
        residual = np.maximum(loss - e0, 1e-12)
        log_half_s_a = np.log(0.5) + np.log(residual[i_a]) / beta
        log_half_s_b = np.log(0.5) + np.log(residual[i_b]) / beta
        log_a = log_n[i_a] + (beta / alpha) * log_half_s_a
        log_b = log_d[i_b] + log_half_s_b
        start = np.clip(np.array([e0, log_a, log_b, alpha, beta]), lo, hi)
        starts.append(start)
    return starts


def fit_compute_to_loss(group: ConfigGroup, eval_dataset: str) -> ComputeToLossLaw:
    """
    Fit L(N, D) = E + ((A/N)^(alpha/beta) + B/D)^beta on one dataset of one group.

    Args:
        group: Records of one configuration
        eval_dataset: Dataset whose loss is modelled

    Returns:
        ComputeToLossLaw: Fitted law with ``fallback_used`` false.

    Raises:
        MissingDataError: If no record carries the dataset
        UnitMismatchError: If the records carry different units
        InsufficientVariationError: If all records share one N or one D; use
            estimate_irreducible_fallback instead
        UnderdeterminedError: With fewer than 6 records, or when the loss is constant
        ConvergenceError: If every start diverged
    """
    members = group.with_dataset(eval_dataset)
    unit = require_single_unit(members, what=f"compute-to-loss fit of {eval_dataset}")
    n, d, loss = group.compute_points(eval_dataset)

    if np.unique(n).size < 2 or np.unique(d).size < 2:
        raise InsufficientVariationError(
            f"{group.config.label}/{eval_dataset}: {np.unique(n).size} distinct N and "
            f"{np.unique(d).size} distinct D; need at least two of each"
        )
    if loss.size < C2L_MIN_POINTS:
        raise UnderdeterminedError(
            f"{group.config.label}/{eval_dataset}: {loss.size} records, need {C2L_MIN_POINTS}"
        )
    if np.ptp(loss) == 0.0:
        raise UnderdeterminedError(
            f"{group.config.label}/{eval_dataset}: loss is constant at {loss[0]}; "
            "the plateau determines E only"
        )

    min_loss = float(loss.min())
    bounds = [
        (0.0, max(min_loss, 1e-12)),
        (C2L_LOG_COEF_MIN, LOG_COEF_MAX),
        (C2L_LOG_COEF_MIN, LOG_COEF_MAX),
        (C2L_EXPONENT_MIN, C2L_EXPONENT_MAX),
        (C2L_EXPONENT_MIN, C2L_EXPONENT_MAX),
    ]
    inputs = np.stack([np.log(n), np.log(d)])
    starts = _compute_to_loss_starts(inputs[0], inputs[1], loss, bounds)

    theta, diagnostics = nlls_fit(
        compute_to_loss_curve, inputs, loss, bounds, starts, jac=compute_to_loss_jacobian
    )
    e, log_a, log_b, alpha, beta = (float(v) for v in theta)
    law = ComputeToLossLaw(
        eval_dataset=eval_dataset,
        config=group.config,
        unit=unit,
        e_irreducible=e,
        a_coef=float(np.exp(log_a)),
        b_coef=float(np.exp(log_b)),
        alpha=alpha,
        beta=beta,
        fallback_used=False,
        sse=diagnostics.sse,
        n_points=int(loss.size),
        diagnostics=diagnostics,
    )
    logger.debug(
        f"{law.law_id}: E={e:.6g} A={law.a_coef:.6g} B={law.b_coef:.6g} "
        f"alpha={alpha:.4g} beta={beta:.4g} sse={diagnostics.sse:.3e}"
    )
    return law


def estimate_irreducible_fallback(group: ConfigGroup, eval_dataset: str) -> float:
    """Minimum observed loss on ``eval_dataset``; MissingDataError if no record has it."""
    return min(r.loss(eval_dataset) for r in group.with_dataset(eval_dataset))


def fit_irreducible(group: ConfigGroup, eval_dataset: str) -> ComputeToLossLaw:
    """
    Stage 1: a fitted compute-to-loss law, or the min-loss fallback when the records
    lack variation in N or D.
    """
    try:
        return fit_compute_to_loss(group, eval_dataset)
    except InsufficientVariationError as e:
        logger.warning(f"{e}; using the minimum observed loss as irreducible error")

    members = group.with_dataset(eval_dataset)
    e_min = estimate_irreducible_fallback(group, eval_dataset)
    losses = np.array([r.loss(eval_dataset) for r in members])
    return ComputeToLossLaw(
        eval_dataset=eval_dataset,
        config=group.config,
        unit=require_single_unit(members),
        e_irreducible=e_min,
        fallback_used=True,
        sse=float(np.sum((losses - e_min) ** 2)),
        n_points=len(members),
    )


def fit_loss_to_loss(
    group: ConfigGroup, x_dataset: str, y_dataset: str, e_x: float, e_y: float
) -> LossToLossLaw:
    """
    Stage 2: fit K and kappa of L_y = K * (L_x - e_x)^kappa + e_y.

    ``e_x`` and ``e_y`` are held fixed. Points at or just below e_x (stage-1 fit
    error) are clamped to a base of RESIDUAL_CLAMP rather than rejected.

    Raises:
        UnderdeterminedError: With fewer than 3 records carrying both datasets
        InvalidArgumentError: If an irreducible error exceeds the observed minimum
            by more than EPS_CLIP
        UnitMismatchError: If the records carry different units
        ConvergenceError: If every start diverged
    """
    members = [r for r in group.records if x_dataset in r.losses and y_dataset in r.losses]
    if len(members) < L2L_MIN_POINTS:
        raise UnderdeterminedError(
            f"{group.config.label}: {len(members)} records carry both {x_dataset} and "
            f"{y_dataset}; need {L2L_MIN_POINTS}"
        )
    unit = require_single_unit(members, what=f"loss-to-loss fit {x_dataset}->{y_dataset}")
    lx, ly = group.loss_pairs(x_dataset, y_dataset)

    if e_x > lx.min() + EPS_CLIP:
        raise InvalidArgumentError(f"E_x={e_x} exceeds the minimum observed {x_dataset} loss {lx.min()}")
    if e_y > ly.min() + EPS_CLIP:
        raise InvalidArgumentError(f"E_y={e_y} exceeds the minimum observed {y_dataset} loss {ly.min()}")

    bounds = [(L2L_K_MIN, L2L_K_MAX), (L2L_KAPPA_MIN, L2L_KAPPA_MAX)]
    anchor = int(np.argsort(lx, kind="stable")[lx.size // 2])
    base = max(lx[anchor] - e_x, RESIDUAL_CLAMP)
    lift = max(ly[anchor] - e_y, RESIDUAL_CLAMP)
    starts = [
        np.array([float(np.clip(lift / base**kappa, L2L_K_MIN, L2L_K_MAX)), kappa])
        for kappa in L2L_KAPPA_STARTS
    ]

    params, diagnostics = nlls_fit(
        lambda p, x: loss_to_loss_curve(p, x, e_x, e_y),
        lx,
        ly,
        bounds,
        starts,
        jac=lambda p, x: loss_to_loss_jacobian(p, x, e_x),
    )
    k, kappa = (float(v) for v in params)
    provisional = LossToLossLaw(
        x_dataset=x_dataset,
        y_dataset=y_dataset,
        config=group.config,
        unit=unit,
        k_coef=k,
        kappa=kappa,
        e_x=e_x,
        e_y=e_y,
        r_squared=0.0,
        n_points=int(lx.size),
        sse=diagnostics.sse,
        diagnostics=diagnostics,
    )
    law = provisional.model_copy(update={"r_squared": r_squared(provisional, (lx, ly))})
    logger.debug(f"{law.law_id}: K={k:.6g} kappa={kappa:.6g} R2={law.r_squared:.6f}")
    return law


class TwoStageFit(BaseModel):
    """Both compute-to-loss laws and the loss-to-loss law built on their E's."""

    model_config = ConfigDict(frozen=True)

    x_law: ComputeToLossLaw
    y_law: ComputeToLossLaw
    loss_to_loss: LossToLossLaw


def fit_two_stage(group: ConfigGroup, x_dataset: str, y_dataset: str) -> TwoStageFit:
    """Fit E_x and E_y from compute-to-loss laws (or fallback), then K and kappa."""
    x_law = fit_irreducible(group, x_dataset)
    y_law = fit_irreducible(group, y_dataset)
    l2l = fit_loss_to_loss(group, x_dataset, y_dataset, x_law.e_irreducible, y_law.e_irreducible)
    return TwoStageFit(x_law=x_law, y_law=y_law, loss_to_loss=l2l)


class GroupFitStatus(BaseModel):
    """Outcome of fitting one (configuration, x, y) line."""

    model_config = ConfigDict(frozen=True)

    config_label: str
    x_dataset: str
    y_dataset: str
    status: Literal["fitted", "fallback", "scatter_only"]
    r_squared: Optional[float] = None
    fallback_used: bool = False
    reason: str = ""


def fit_groups(
    groups: Sequence[ConfigGroup],
    x_dataset: str,
    y_datasets: Sequence[str],
    threads: int = THREADS,
    progress: bool = False,
) -> Tuple[LawBundle, List[GroupFitStatus]]:
    """
    Run the two-stage fit for every group and every y dataset.

    Stage-1 fits are shared between pairs and fanned out over ``threads`` workers;
    results are assembled in group order, so the output does not depend on the
    thread count. A group whose fit fails is reported ``scatter_only``.
    """
    datasets = list(dict.fromkeys([x_dataset, *y_datasets]))
    jobs: List[Tuple[int, str]] = [(i, ds) for i in range(len(groups)) for ds in datasets]

    def stage_one(job: Tuple[int, str]) -> Union[ComputeToLossLaw, LawlineError]:
        index, dataset = job
        group = groups[index]
        try:
            return fit_irreducible(group, dataset)
        except LawlineError as e:
            logger.warning(f"{group.config.label}/{dataset}: compute-to-loss fit failed: {e}")
            return e

    workers = max(1, min(threads, len(jobs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            tqdm(
                pool.map(stage_one, jobs),
                total=len(jobs),
                desc="Compute-to-loss fits",
                disable=not progress,
            )
        )
    stage_one_by_job = dict(zip(jobs, results))

    bundle = LawBundle()
    statuses: List[GroupFitStatus] = []
    for index, group in enumerate(groups):
        for dataset in datasets:
            result = stage_one_by_job[(index, dataset)]
            if isinstance(result, ComputeToLossLaw):
                bundle.compute_to_loss.append(result)
        x_result = stage_one_by_job[(index, x_dataset)]
        for y_dataset in y_datasets:
            y_result = stage_one_by_job[(index, y_dataset)]
            statuses.append(_second_stage(group, x_dataset, y_dataset, x_result, y_result, bundle))

    fitted = sum(1 for s in statuses if s.status != "scatter_only")
    logger.info(f"Fitted {fitted}/{len(statuses)} loss-to-loss lines over {len(groups)} configurations")
    return bundle, statuses


def _second_stage(
    group: ConfigGroup,
    x_dataset: str,
    y_dataset: str,
    x_result: Union[ComputeToLossLaw, LawlineError],
    y_result: Union[ComputeToLossLaw, LawlineError],
    bundle: LawBundle,
) -> GroupFitStatus:
    label = group.config.label
    for result in (x_result, y_result):
        if not isinstance(result, ComputeToLossLaw):
            return GroupFitStatus(
                config_label=label, x_dataset=x_dataset, y_dataset=y_dataset,
                status="scatter_only", reason=str(result),
            )
    try:
        law = fit_loss_to_loss(group, x_dataset, y_dataset, x_result.e_irreducible, y_result.e_irreducible)
    except LawlineError as e:
        logger.warning(f"{label}: loss-to-loss fit {x_dataset}->{y_dataset} failed: {e}")
        return GroupFitStatus(
            config_label=label, x_dataset=x_dataset, y_dataset=y_dataset,
            status="scatter_only", reason=str(e),
        )
    bundle.loss_to_loss.append(law)
    fallback = x_result.fallback_used or y_result.fallback_used
    return GroupFitStatus(
        config_label=label,
        x_dataset=x_dataset,
        y_dataset=y_dataset,
        status="fallback" if fallback else "fitted",
        r_squared=law.r_squared,
        fallback_used=fallback,
    )
