"""
Synthetic worlds: known laws, grids and interventions.

A world fixes the true compute-to-loss law of one or more datasets and the true
loss-to-loss couplings of further datasets to the x dataset. Records generated from
it are the ground truth the fitters are checked against.
"""

import json
import os
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import InvalidArgumentError
from src.core.logger import get_logger
from src.core.settings import (
    C2L_EXPONENT_MAX,
    C2L_MAX_COEF,
    L2L_K_MAX,
    L2L_KAPPA_MAX,
)
from src.core.types import ConfigId, LossUnit
from src.fitlaw.laws import ComputeToLossLaw, LossToLossLaw

logger = get_logger("synth_world")

# Parameter counts of the trained model family, per architecture
MODEL_SIZES: Dict[str, List[int]] = {
    "llama": [59_000_000, 72_000_000, 76_000_000, 145_000_000, 158_000_000, 172_000_000,
              314_000_000, 365_000_000, 416_000_000],
    "mamba": [69_000_000, 73_000_000, 76_000_000, 145_000_000, 158_000_000, 172_000_000,
              315_000_000, 367_000_000, 420_000_000],
}
TOKENS_PER_PARAM = 20
DEFAULT_D_MIN = 100_000_000
DEFAULT_D_POINTS = 20


class ComputeLawParams(BaseModel):
    """True (E, A, B, alpha, beta) of a compute-to-loss law."""

    model_config = ConfigDict(frozen=True)

    e: float = Field(..., ge=0.0)
    a: float = Field(..., gt=0.0, le=C2L_MAX_COEF)
    b: float = Field(..., gt=0.0, le=C2L_MAX_COEF)
    alpha: float = Field(..., gt=0.0, le=C2L_EXPONENT_MAX)
    beta: float = Field(..., gt=0.0, le=C2L_EXPONENT_MAX)

    def loss(self, params_n: float, tokens_d: float) -> float:
        return self.e + ((self.a / params_n) ** (self.alpha / self.beta) + self.b / tokens_d) ** self.beta


class Coupling(BaseModel):
    """
    True loss-to-loss law from the world's x dataset to one y dataset.

    ``e_x`` may be omitted; it is always the x law's E.
    """

    model_config = ConfigDict(frozen=True)

    k: float = Field(..., gt=0.0, le=L2L_K_MAX)
    kappa: float = Field(..., gt=0.0, le=L2L_KAPPA_MAX)
    e_x: Optional[float] = Field(default=None, ge=0.0)
    e_y: float = Field(..., ge=0.0)

    def loss(self, l_x: float) -> float:
        return self.k * max(l_x - self.e_x, 0.0) ** self.kappa + self.e_y


class Grid(BaseModel):
    """Checkpoints to generate: every (N, D, seed) combination."""

    model_config = ConfigDict(frozen=True)

    n_values: List[int] = Field(..., min_length=1)
    d_values: List[int] = Field(..., min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)

    @model_validator(mode="after")
    def _check_positive(self) -> "Grid":
        if min(self.n_values) < 1 or min(self.d_values) < 1:
            raise ValueError("grid N and D values must be >= 1")
        return self

    @property
    def size(self) -> int:
        return len(self.n_values) * len(self.d_values) * len(self.seeds)


def default_grid(architecture: Literal["llama", "mamba"] = "llama", seeds: Optional[List[int]] = None) -> Grid:
    """
    Grid mirroring the trained model family: its nine sizes, and 20 log-spaced token
    budgets from 1e8 up to 20 tokens per parameter of the largest model.
    """
    sizes = MODEL_SIZES[architecture]
    d_max = TOKENS_PER_PARAM * max(sizes)
    d_values = [int(round(d)) for d in np.geomspace(DEFAULT_D_MIN, d_max, DEFAULT_D_POINTS)]
    return Grid(n_values=list(sizes), d_values=d_values, seeds=seeds or [0])


class WorldSpec(BaseModel):
    """
    A synthetic world.

    Attributes:
        config: Configuration every generated record carries
        x_dataset: Dataset whose compute-to-loss law drives the couplings
        train_law: True compute-to-loss law per dataset; must include x_dataset
        couplings: True loss-to-loss law per further y dataset
        noise_sigma: Standard deviation of additive Gaussian noise on every loss
        grid: Checkpoints to generate
        unit: Unit the laws and the noise are expressed in
        emit_unit: Unit written to the records; defaults to ``unit``
        token_count: Evaluated tokens attached to every measurement
        byte_count: UTF-8 bytes attached to every measurement
        law_token_count: Token count the nats-per-token laws hold at; defaults to
            token_count. A tokenizer shift keeps it while token_count grows, so the
            same text costs the same bits per byte
    """

    model_config = ConfigDict(frozen=True)

    config: ConfigId
    x_dataset: str = Field(..., min_length=1)
    train_law: Dict[str, ComputeLawParams] = Field(..., min_length=1)
    couplings: Dict[str, Coupling] = Field(default_factory=dict)
    noise_sigma: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)
    grid: Grid
    unit: LossUnit = LossUnit.NATS_PER_TOKEN
    emit_unit: Optional[LossUnit] = None
    token_count: Optional[int] = Field(default=None, ge=1)
    byte_count: Optional[int] = Field(default=None, ge=1)
    law_token_count: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _fill_coupling_shift(cls, data: Any) -> Any:
        # E_x of every coupling is the x law's irreducible error
        if not isinstance(data, dict):
            return data
        laws = data.get("train_law") or {}
        x_law = laws.get(data.get("x_dataset"))
        couplings = data.get("couplings")
        if x_law is None or not isinstance(couplings, dict):
            return data
        e_x = x_law.e if isinstance(x_law, ComputeLawParams) else x_law.get("e")
        filled = {}
        for label, coupling in couplings.items():
            if isinstance(coupling, dict) and coupling.get("e_x") is None:
                coupling = {**coupling, "e_x": e_x}
            filled[label] = coupling
        return {**data, "couplings": filled}

    @model_validator(mode="after")
    def _check_world(self) -> "WorldSpec":
        if self.x_dataset not in self.train_law:
            raise ValueError(f"x_dataset '{self.x_dataset}' has no train_law entry")
        e_x = self.train_law[self.x_dataset].e
        for label, coupling in self.couplings.items():
            if label in self.train_law:
                raise ValueError(f"'{label}' has both a train_law and a coupling")
            if coupling.e_x is None or abs(coupling.e_x - e_x) > 1e-12:
                raise ValueError(f"coupling '{label}' has e_x={coupling.e_x}; the x law's E is {e_x}")
        if self.output_unit != self.unit and (self.token_count is None or self.byte_count is None):
            raise ValueError("emitting in another unit needs token_count and byte_count")
        if self.law_token_count is not None and self.token_count is None:
            raise ValueError("law_token_count needs token_count")
        return self

    @property
    def per_token_scale(self) -> float:
        """Factor from law nats per token to emitted nats per token under the current tokenizer."""
        if self.unit != LossUnit.NATS_PER_TOKEN or self.law_token_count is None:
            return 1.0
        return self.law_token_count / self.token_count

    @property
    def output_unit(self) -> LossUnit:
        return self.emit_unit or self.unit

    @property
    def datasets(self) -> List[str]:
        """x dataset first, then the other compute-to-loss datasets, then the couplings."""
        others = [label for label in self.train_law if label != self.x_dataset]
        return [self.x_dataset, *others, *self.couplings]

    @classmethod
    def from_file(cls, file_path: str) -> "WorldSpec":
        """
        Load a world from a JSON or YAML file.

        Args:
            file_path: Path ending in .json, .yaml or .yml

        Returns:
            WorldSpec: The validated world.

        Raises:
            InvalidArgumentError: If the file format is not supported
            FileNotFoundError: If the file does not exist
            ValidationError: If the content is not a valid world
        """
        file_path = str(file_path)
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"World file not found: {file_path}")

        if file_path.endswith(".json"):
            with open(file_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        elif file_path.endswith((".yaml", ".yml")):
            with open(file_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        else:
            raise InvalidArgumentError(
                f"Unsupported file format: {file_path}. Use .json, .yaml, or .yml"
            )

        return cls.model_validate(data)

    def true_compute_to_loss(self, dataset: str) -> ComputeToLossLaw:
        """The exact compute-to-loss law ``dataset`` obeys, couplings included."""
        if dataset in self.train_law:
            params = self.train_law[dataset]
        elif dataset in self.couplings:
            params = implied_compute_to_loss(self, dataset)
        else:
            raise InvalidArgumentError(f"World has no dataset '{dataset}'")
        return ComputeToLossLaw(
            eval_dataset=dataset,
            config=self.config,
            unit=self.unit,
            e_irreducible=params.e,
            a_coef=params.a,
            b_coef=params.b,
            alpha=params.alpha,
            beta=params.beta,
            sse=0.0,
            n_points=self.grid.size,
        )

    def true_loss_to_loss(self, y_dataset: str) -> LossToLossLaw:
        """The exact loss-to-loss law from the x dataset to coupled ``y_dataset``."""
        if y_dataset not in self.couplings:
            raise InvalidArgumentError(f"World has no coupling for '{y_dataset}'")
        coupling = self.couplings[y_dataset]
        return LossToLossLaw(
            x_dataset=self.x_dataset,
            y_dataset=y_dataset,
            config=self.config,
            unit=self.unit,
            k_coef=coupling.k,
            kappa=coupling.kappa,
            e_x=coupling.e_x,
            e_y=coupling.e_y,
            r_squared=1.0,
            n_points=max(self.grid.size, 3),
        )


def implied_compute_to_loss(spec: WorldSpec, y_dataset: str) -> ComputeLawParams:
    """
    Compute-to-loss law of a coupled dataset.

    Substituting the x law into the coupling gives again the compute-to-loss form,
    with E' = E_y, A' = A K^(1/(alpha kappa)), B' = B K^(1/(beta kappa)),
    alpha' = alpha kappa and beta' = beta kappa.
    """
    if y_dataset not in spec.couplings:
        raise InvalidArgumentError(f"World has no coupling for '{y_dataset}'")
    x_law = spec.train_law[spec.x_dataset]
    coupling = spec.couplings[y_dataset]
    return ComputeLawParams(
        e=coupling.e_y,
        a=x_law.a * coupling.k ** (1.0 / (x_law.alpha * coupling.kappa)),
        b=x_law.b * coupling.k ** (1.0 / (x_law.beta * coupling.kappa)),
        alpha=x_law.alpha * coupling.kappa,
        beta=x_law.beta * coupling.kappa,
    )


class InterventionKind(str, Enum):
    """Training change a synthetic world can undergo."""

    DATA_SHIFT = "data"
    ARCH_NOISE = "arch"
    TOKENIZER_SHIFT = "tokenizer"

    @classmethod
    def parse(cls, text: str) -> "InterventionKind":
        aliases = {
            "data": cls.DATA_SHIFT, "datashift": cls.DATA_SHIFT,
            "arch": cls.ARCH_NOISE, "archnoise": cls.ARCH_NOISE,
            "tokenizer": cls.TOKENIZER_SHIFT, "tokenizershift": cls.TOKENIZER_SHIFT,
        }
        key = text.strip().lower().replace("_", "").replace("-", "")
        if key not in aliases:
            raise InvalidArgumentError(
                f"Unknown intervention '{text}'; use one of data, arch, tokenizer"
            )
        return aliases[key]


def _tag(label: str, kind: str, magnitude: float) -> str:
    return f"{label}+{kind}{magnitude:g}"


def apply_intervention(
    spec: WorldSpec,
    kind: InterventionKind,
    magnitude: float,
    k_factor: float = 1.0,
    kappa_factor: float = 1.0,
) -> WorldSpec:
    """
    Derive the world a training intervention leads to.

    - DATA_SHIFT moves every coupling to a new line: E_y rises by ``magnitude``, K
      and kappa are multiplied by ``k_factor`` and ``kappa_factor``. The pretraining
      label is tagged.
    - ARCH_NOISE adds ``magnitude`` to noise_sigma only, so points stay on the
      base line. The architecture label is tagged.
    - TOKENIZER_SHIFT multiplies token_count by 1 + ``magnitude``. Bits per byte are
      unchanged in both world units: a nats world keeps law_token_count, so its
      per-token losses shrink by the same factor. The tokenizer label is tagged.

    Magnitude 0 returns ``spec`` itself.

    Raises:
        InvalidArgumentError: On a negative magnitude, or a tokenizer shift of a
            world without token and byte counts
    """
    kind = InterventionKind(kind)
    if magnitude < 0 or not np.isfinite(magnitude):
        raise InvalidArgumentError(f"Intervention magnitude must be >= 0, got {magnitude}")
    if magnitude == 0:
        return spec

    config = spec.config
    if kind == InterventionKind.DATA_SHIFT:
        couplings = {
            label: c.model_copy(update={
                "e_y": c.e_y + magnitude,
                "k": c.k * k_factor,
                "kappa": c.kappa * kappa_factor,
            })
            for label, c in spec.couplings.items()
        }
        config = config.model_copy(update={"pretrain_data": _tag(config.pretrain_data, "data", magnitude)})
        update = {"couplings": couplings, "config": config}
    elif kind == InterventionKind.ARCH_NOISE:
        config = config.model_copy(update={"architecture": _tag(config.architecture, "noise", magnitude)})
        update = {"noise_sigma": spec.noise_sigma + magnitude, "config": config}
    else:
        if spec.token_count is None or spec.byte_count is None:
            raise InvalidArgumentError("A tokenizer shift needs a world with token_count and byte_count")
        config = config.model_copy(update={"tokenizer": _tag(config.tokenizer, "tok", magnitude)})
        update = {
            "token_count": int(round(spec.token_count * (1.0 + magnitude))),
            "law_token_count": spec.law_token_count or spec.token_count,
            "config": config,
        }

    shifted = WorldSpec.model_validate({**spec.model_dump(), **update})
    logger.debug(f"{kind.value} intervention of {magnitude:g}: {spec.config.label} -> {shifted.config.label}")
    return shifted
