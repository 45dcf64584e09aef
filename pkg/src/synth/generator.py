"""
Checkpoint record generation from a synthetic world.

Every grid point draws its noise from its own generator seeded with
(rng_seed, stream, N index, D index, seed index), so the output is the same
whether the points are produced serially or by several threads.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence

import numpy as np

from src.core.errors import InvalidArgumentError
from src.core.logger import get_logger
from src.core.settings import THREADS
from src.core.types import CheckpointRecord, LossMeasurement, LossUnit
from src.core.units import bpb_to_nll, nll_to_bpb
from src.ingest.grouping import RecordSet
from src.synth.world import InterventionKind, WorldSpec, apply_intervention

logger = get_logger("synth_generator")


def _emit(spec: WorldSpec, value: float) -> float:
    if spec.output_unit == spec.unit:
        return value
    if spec.output_unit == LossUnit.BITS_PER_BYTE:
        return nll_to_bpb(value, spec.token_count, spec.byte_count)
    return bpb_to_nll(value, spec.token_count, spec.byte_count)


def _noiseless_losses(spec: WorldSpec, params_n: int, tokens_d: int) -> Dict[str, float]:
    losses = {label: law.loss(params_n, tokens_d) for label, law in spec.train_law.items()}
    l_x = losses[spec.x_dataset]
    for label, coupling in spec.couplings.items():
        losses[label] = coupling.loss(l_x)
    return {label: losses[label] for label in spec.datasets}


def _row_records(spec: WorldSpec, rng_seed: int, stream: int, i_n: int) -> List[CheckpointRecord]:
    """Records of every (D, seed) point at the i_n-th parameter count."""
    params_n = spec.grid.n_values[i_n]
    scale = spec.per_token_scale
    records = []
    for i_d, tokens_d in enumerate(spec.grid.d_values):
        clean = _noiseless_losses(spec, params_n, tokens_d)
        for i_s, seed in enumerate(spec.grid.seeds):
            rng = np.random.default_rng([rng_seed, stream, i_n, i_d, i_s])
            if spec.noise_sigma > 0:
                noise = rng.normal(0.0, spec.noise_sigma, size=len(clean))
            else:
                noise = np.zeros(len(clean))
            losses = {}
            for (label, value), eps in zip(clean.items(), noise):
                # Losses are non-negative; only extreme noise draws can reach the floor
                noisy = max(value + float(eps), 0.0) * scale
                losses[label] = LossMeasurement(
                    dataset=label,
                    value=_emit(spec, noisy),
                    unit=spec.output_unit,
                    token_count=spec.token_count,
                    byte_count=spec.byte_count,
                )
            records.append(
                CheckpointRecord(
                    config=spec.config,
                    params_n=params_n,
                    tokens_d=tokens_d,
                    seed=seed,
                    step=i_d,
                    losses=losses,
                )
            )
    return records


def generate(spec: WorldSpec, rng_seed: int, threads: int = THREADS, stream: int = 0) -> RecordSet:
    """
    Generate one checkpoint record per (N, D, seed) grid point.

    x-dataset (and other compute-to-loss datasets) losses come from their laws,
    coupled y-dataset losses from their loss-to-loss law applied to the noiseless
    x loss. Each loss then gets independent Gaussian noise of ``noise_sigma`` in
    the world's unit, is rescaled when a tokenizer shift changed the tokens per
    text, and is converted to ``emit_unit``.

    Args:
        spec: World to sample
        rng_seed: Non-negative seed; identical seeds give identical records
        threads: Worker cap; the output does not depend on it
        stream: Sub-stream of ``rng_seed``; worlds of one scenario use distinct streams

    Returns:
        RecordSet: Records ordered by N, then D, then seed.

    Raises:
        InvalidArgumentError: If rng_seed is negative
    """
    if rng_seed < 0:
        raise InvalidArgumentError(f"rng_seed must be >= 0, got {rng_seed}")
    rows = range(len(spec.grid.n_values))
    workers = max(1, min(threads, len(rows)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(lambda i_n: _row_records(spec, rng_seed, stream, i_n), rows))
    records = [record for chunk in chunks for record in chunk]
    logger.info(
        f"Generated {len(records)} records for {spec.config.label} "
        f"(sigma={spec.noise_sigma:g}, seed={rng_seed})"
    )
    return RecordSet.build(records, source="synthetic")


def generate_scenario(
    spec: WorldSpec,
    interventions: Sequence[tuple],
    rng_seed: int,
    threads: int = THREADS,
) -> RecordSet:
    """
    Records of the base world followed by one intervened world per (kind, magnitude).

    Each world draws from stream ``position`` of ``rng_seed``, so adding an
    intervention never changes the records of the worlds before it, and no world
    shares noise with a world of another seed.
    """
    worlds = [spec]
    for kind, magnitude in interventions:
        worlds.append(apply_intervention(spec, InterventionKind(kind), float(magnitude)))
    labels = [w.config.label for w in worlds]
    if len(set(labels)) != len(labels):
        raise InvalidArgumentError(f"Interventions produce duplicate configurations: {labels}")

    records: List[CheckpointRecord] = []
    for position, world in enumerate(worlds):
        records.extend(generate(world, rng_seed, threads, stream=position).records)
    return RecordSet.build(records, source="synthetic")
