"""Shared fixtures for the lawline test suite."""

from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pytest

from src.core.types import CheckpointRecord, ConfigId, LossMeasurement, LossUnit
from src.fitlaw.laws import LossToLossLaw
from src.ingest.grouping import ConfigGroup
from src.synth.world import Grid, WorldSpec

DATA_DIR = Path(__file__).parent / "data"

EVALS_VALIDATION = ["C4", "PileUC", "FW-E", "RW", "SPJ"]
EVALS_TEST = ["ARC-C", "ARC-E", "HellaSwag", "MMLU", "PIQA"]
# (pretrain, architecture, N) -> published (avg validation, avg test)
EVALS_AVERAGES = {
    ("FW-Edu", "Mamba", 421_000_000): (3.63, 3.88),
    ("FW-Edu", "Llama", 417_000_000): (3.58, 4.04),
    ("Pile UC", "Mamba", 421_000_000): (3.41, 4.70),
    ("Pile UC", "Llama", 417_000_000): (3.41, 4.68),
    ("C4", "Mamba", 421_000_000): (3.61, 4.75),
    ("C4", "Llama", 417_000_000): (3.58, 4.78),
    ("FW-Edu", "Mamba", 368_000_000): (3.72, 4.18),
    ("FW-Edu", "Llama", 365_000_000): (3.67, 4.36),
    ("Pile UC", "Mamba", 368_000_000): (3.49, 4.93),
    ("Pile UC", "Llama", 365_000_000): (3.49, 5.02),
    ("C4", "Mamba", 368_000_000): (3.70, 4.97),
    ("C4", "Llama", 365_000_000): (3.67, 4.92),
}


def make_config(pretrain: str = "FW-Edu", arch: str = "Llama", tok: str = "tiktoken", **extra) -> ConfigId:
    return ConfigId(pretrain_data=pretrain, architecture=arch, tokenizer=tok, extra=extra)


def make_record(
    losses: Dict[str, float],
    params_n: int = 100_000_000,
    tokens_d: int = 1_000_000_000,
    config: Optional[ConfigId] = None,
    unit: LossUnit = LossUnit.NATS_PER_TOKEN,
    seed: Optional[int] = 0,
    step: Optional[int] = None,
    token_count: Optional[int] = None,
    byte_count: Optional[int] = None,
) -> CheckpointRecord:
    return CheckpointRecord(
        config=config or make_config(),
        params_n=params_n,
        tokens_d=tokens_d,
        seed=seed,
        step=step,
        losses={
            label: LossMeasurement(
                dataset=label, value=value, unit=unit, token_count=token_count, byte_count=byte_count
            )
            for label, value in losses.items()
        },
    )


def make_l2l(
    k: float = 1.0,
    kappa: float = 1.0,
    e_x: float = 0.0,
    e_y: float = 0.0,
    config: Optional[ConfigId] = None,
    unit: LossUnit = LossUnit.BITS_PER_BYTE,
    x_dataset: str = "train",
    y_dataset: str = "test",
) -> LossToLossLaw:
    return LossToLossLaw(
        x_dataset=x_dataset,
        y_dataset=y_dataset,
        config=config or make_config(),
        unit=unit,
        k_coef=k,
        kappa=kappa,
        e_x=e_x,
        e_y=e_y,
        r_squared=1.0,
        n_points=10,
    )


def pairs_group(lx, ly, config: Optional[ConfigId] = None) -> ConfigGroup:
    """Group whose records carry the given (train, test) loss pairs."""
    config = config or make_config()
    records = tuple(
        make_record({"train": float(x), "test": float(y)}, params_n=1000 + i, config=config)
        for i, (x, y) in enumerate(zip(lx, ly))
    )
    return ConfigGroup(config=config, records=records)


def acceptance_grid(seeds=(0, 1, 2)) -> Grid:
    n_values = [int(round(n)) for n in np.geomspace(6e7, 4e8, 9)]
    d_values = [int(round(d)) for d in np.geomspace(1e8, 8e9, 20)]
    return Grid(n_values=n_values, d_values=d_values, seeds=list(seeds))


def acceptance_world(noise_sigma: float = 0.0, seeds=(0, 1, 2)) -> WorldSpec:
    """Train law (E=2.0, A=400, B=2000, alpha=0.34, beta=0.28), test coupled with K=0.8, kappa=1.3."""
    return WorldSpec(
        config=make_config(),
        x_dataset="train",
        train_law={"train": {"e": 2.0, "a": 400.0, "b": 2000.0, "alpha": 0.34, "beta": 0.28}},
        couplings={"test": {"k": 0.8, "kappa": 1.3, "e_y": 2.5}},
        noise_sigma=noise_sigma,
        grid=acceptance_grid(seeds),
    )


def wide_world(noise_sigma: float = 0.0, seeds=(0, 1, 2)) -> WorldSpec:
    """
    A world whose train losses span about 1.4 nats, so noise of 0.01 leaves the curvature
    identifiable.
    """
    n_values = [int(round(n)) for n in np.geomspace(6e7, 1e10, 9)]
    d_values = [int(round(d)) for d in np.geomspace(1e8, 1e12, 20)]
    return WorldSpec(
        config=make_config(),
        x_dataset="train",
        train_law={"train": {"e": 2.0, "a": 2e7, "b": 4e8, "alpha": 0.34, "beta": 0.28}},
        couplings={"test": {"k": 0.8, "kappa": 1.3, "e_y": 2.5}},
        noise_sigma=noise_sigma,
        grid=Grid(n_values=n_values, d_values=d_values, seeds=list(seeds)),
    )


@pytest.fixture
def evals_path() -> Path:
    return DATA_DIR / "mamba_llama_evals.csv"


@pytest.fixture
def spec_world() -> WorldSpec:
    return acceptance_world()
