"""
The two scaling-law families and their fitted-law types.

Compute-to-loss:  L(N, D) = E + ((A/N)^(alpha/beta) + B/D)^beta
Loss-to-loss:     L_y = K * (L_x - E_x)^kappa + E_y

Compute-to-loss is evaluated in log space for N, D, A and B; the optimizer works
on theta = (E, ln A, ln B, alpha, beta).
"""

import json
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.artifacts import dumps_json, atomic_write_text
from src.core.errors import InvalidArgumentError, InvalidCompositionError
from src.core.settings import RESIDUAL_CLAMP
from src.core.types import ConfigId, LossUnit
from src.fitlaw.engine import FitDiagnostics


def compute_to_loss_curve(theta: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """
    Compute-to-loss prediction.

    Args:
        theta: (E, ln A, ln B, alpha, beta)
        inputs: Array of shape (2, n) holding ln N and ln D
    """
    e, log_a, log_b, alpha, beta = theta
    log_n, log_d = inputs
    u = np.exp((alpha / beta) * (log_a - log_n))
    v = np.exp(log_b - log_d)
    return e + (u + v) ** beta


def compute_to_loss_jacobian(theta: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of compute_to_loss_curve with respect to theta, shape (n, 5)."""
    e, log_a, log_b, alpha, beta = theta
    log_n, log_d = inputs
    gap = log_a - log_n
    u = np.exp((alpha / beta) * gap)
    v = np.exp(log_b - log_d)
    s = u + v
    power = s**beta
    s_pow = power / s  # s^(beta - 1)

    jac = np.empty((log_n.size, 5))
    jac[:, 0] = 1.0
    jac[:, 1] = alpha * u * s_pow
    jac[:, 2] = beta * v * s_pow
    jac[:, 3] = u * gap * s_pow
    jac[:, 4] = power * np.log(s) - (alpha / beta) * u * gap * s_pow
    return jac


def loss_to_loss_curve(
    params: np.ndarray, lx: np.ndarray, e_x: float, e_y: float, clamp: float = RESIDUAL_CLAMP
) -> np.ndarray:
    """K * max(L_x - E_x, clamp)^kappa + E_y for params = (K, kappa)."""
    k, kappa = params
    base = np.maximum(np.asarray(lx, dtype=np.float64) - e_x, clamp)
    return k * base**kappa + e_y


def loss_to_loss_jacobian(
    params: np.ndarray, lx: np.ndarray, e_x: float, clamp: float = RESIDUAL_CLAMP
) -> np.ndarray:
    """Analytic Jacobian of loss_to_loss_curve with respect to (K, kappa), shape (n, 2)."""
    k, kappa = params
    base = np.maximum(np.asarray(lx, dtype=np.float64) - e_x, clamp)
    powered = base**kappa
    return np.column_stack([powered, k * powered * np.log(base)])


class ComputeToLossLaw(BaseModel):
    """
    Fitted compute-to-loss law of one configuration on one evaluation dataset.

    When ``fallback_used`` is true the records lacked variation in N or D; only the
    irreducible error (the minimum observed loss) is known and the curve
    parameters are absent.
    """

    model_config = ConfigDict(frozen=True)

    eval_dataset: str
    config: ConfigId
    unit: LossUnit
    e_irreducible: float = Field(..., ge=0.0, description="Irreducible error E")
    a_coef: Optional[float] = Field(default=None, gt=0.0, description="A")
    b_coef: Optional[float] = Field(default=None, gt=0.0, description="B")
    alpha: Optional[float] = Field(default=None, gt=0.0)
    beta: Optional[float] = Field(default=None, gt=0.0)
    fallback_used: bool = False
    sse: float = Field(..., ge=0.0)
    n_points: int = Field(..., ge=1)
    diagnostics: Optional[FitDiagnostics] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "ComputeToLossLaw":
        curve = (self.a_coef, self.b_coef, self.alpha, self.beta)
        if not self.fallback_used and any(p is None for p in curve):
            raise ValueError("a fitted compute-to-loss law needs A, B, alpha and beta")
        return self

    @property
    def law_id(self) -> str:
        return f"c2l:{self.config.label}:{self.eval_dataset}"

    @property
    def theta(self) -> np.ndarray:
        if self.fallback_used:
            raise InvalidCompositionError(f"{self.law_id} is a min-loss fallback without a curve")
        return np.array(
            [self.e_irreducible, np.log(self.a_coef), np.log(self.b_coef), self.alpha, self.beta]
        )

    def predict(self, params_n: ArrayLike, tokens_d: ArrayLike) -> np.ndarray:
        """Predicted loss at N parameters and D tokens."""
        log_n = np.log(np.asarray(params_n, dtype=np.float64))
        log_d = np.log(np.asarray(tokens_d, dtype=np.float64))
        log_n, log_d = np.broadcast_arrays(log_n, log_d)
        inputs = np.stack([log_n.ravel(), log_d.ravel()])
        return compute_to_loss_curve(self.theta, inputs).reshape(log_n.shape)


class LossToLossLaw(BaseModel):
    """Fitted shifted power law between two datasets' losses for one configuration."""

    model_config = ConfigDict(frozen=True)

    x_dataset: str
    y_dataset: str
    config: ConfigId
    unit: LossUnit
    k_coef: float = Field(..., gt=0.0, description="K")
    kappa: float = Field(..., gt=0.0, description="kappa")
    e_x: float = Field(..., ge=0.0, description="Irreducible error on the x dataset")
    e_y: float = Field(..., ge=0.0, description="Irreducible error on the y dataset")
    r_squared: float = Field(..., le=1.0)
    n_points: int = Field(..., ge=3)
    sse: float = Field(default=0.0, ge=0.0)
    diagnostics: Optional[FitDiagnostics] = None

    @property
    def law_id(self) -> str:
        return f"l2l:{self.config.label}:{self.x_dataset}->{self.y_dataset}"

    def predict(self, l_x: ArrayLike) -> np.ndarray:
        return predict_y(self, l_x)


def predict_y(law: LossToLossLaw, l_x: ArrayLike) -> Union[float, np.ndarray]:
    """
    K * max(l_x - E_x, 0)^kappa + E_y.

    Below E_x the curve is flat at E_y. Scalars in, scalar out.
    """
    values = np.asarray(l_x, dtype=np.float64)
    base = np.maximum(values - law.e_x, 0.0)
    result = law.k_coef * base**law.kappa + law.e_y
    if np.ndim(l_x) == 0:
        return float(result)
    return result


def r_squared(law: LossToLossLaw, points: Tuple[ArrayLike, ArrayLike]) -> float:
    """
    Coefficient of determination of ``law`` on (L_x, L_y) points.

    1 - SS_res / SS_tot with SS_tot taken about the mean of L_y. Negative for fits
    worse than the mean.

    Raises:
        InvalidArgumentError: With fewer than 2 points or constant L_y
    """
    lx = np.asarray(points[0], dtype=np.float64).ravel()
    ly = np.asarray(points[1], dtype=np.float64).ravel()
    if lx.size != ly.size:
        raise InvalidArgumentError(f"{lx.size} x values but {ly.size} y values")
    if ly.size < 2:
        raise InvalidArgumentError("r_squared needs at least 2 points")
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        raise InvalidArgumentError("r_squared undefined: L_y has zero variance")
    ss_res = float(np.sum((ly - predict_y(law, lx)) ** 2))
    return 1.0 - ss_res / ss_tot


class LawBundle(BaseModel):
    """Serialized collection of fitted laws, as written by ``lawline fit``."""

    compute_to_loss: List[ComputeToLossLaw] = Field(default_factory=list)
    loss_to_loss: List[LossToLossLaw] = Field(default_factory=list)

    def to_json(self) -> str:
        return dumps_json(self.model_dump(mode="json"))

    def save(self, path: Union[str, Path]) -> Path:
        return atomic_write_text(path, self.to_json())

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "LawBundle":
        """
        Load a bundle, or a single law file written next to it.

        Raises:
            FileNotFoundError: If the file does not exist
            ValidationError: If the content is not a law or bundle
        """
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "compute_to_loss" in data or "loss_to_loss" in data:
            return cls.model_validate(data)
        if "kappa" in data:
            return cls(loss_to_loss=[LossToLossLaw.model_validate(data)])
        return cls(compute_to_loss=[ComputeToLossLaw.model_validate(data)])

    def pairs(self) -> List[Tuple[str, str]]:
        """Distinct (x_dataset, y_dataset) pairs in first-seen order."""
        seen: List[Tuple[str, str]] = []
        for law in self.loss_to_loss:
            key = (law.x_dataset, law.y_dataset)
            if key not in seen:
                seen.append(key)
        return seen

    def for_pair(self, x_dataset: str, y_dataset: str) -> List[LossToLossLaw]:
        return [
            law
            for law in self.loss_to_loss
            if law.x_dataset == x_dataset and law.y_dataset == y_dataset
        ]

    def compute_law(self, config: ConfigId, dataset: str) -> Optional[ComputeToLossLaw]:
        for law in self.compute_to_loss:
            if law.config == config and law.eval_dataset == dataset:
                return law
        return None
