"""Training configuration and per-epoch metrics models."""

from typing import Literal, Optional, Union

from pydantic import Field, model_validator

from .ansatz import EvalMode
from .base import BaseConfigModel


class Theorem3Schedule(BaseConfigModel):
    """Constant step eta = (1/T) R / sqrt(L^2 + beta^2 R^2), T = total optimizer steps."""
    kind: Literal["theorem3"] = "theorem3"
    r_bound: float = Field(gt=0, description="Gradient-bound constant R", alias="R")
    l_bound: float = Field(gt=0, description="Gradient-norm constant L", alias="L")
    beta_smooth: float = Field(gt=0, description="Smoothness constant beta", alias="betaSmooth")


class TrainConfig(BaseConfigModel):
    """Downstream optimization settings for the trainable head."""
    epochs: int = Field(default=100, ge=1, description="Number of epochs T")
    batch_size: int = Field(default=16, ge=1, alias="batchSize")
    optimizer: Literal["sgd", "adam"] = Field(default="adam")
    lr: Union[float, Theorem3Schedule] = Field(default=0.001, description="Fixed learning rate or schedule")
    adam_beta1: float = Field(default=0.9, ge=0, lt=1, alias="adamBeta1")
    adam_beta2: float = Field(default=0.999, ge=0, lt=1, alias="adamBeta2")
    adam_eps: float = Field(default=1e-8, gt=0, alias="adamEps")
    eval_mode: EvalMode = Field(default_factory=EvalMode, alias="evalMode")
    seed: Optional[int] = Field(default=None, description="Training seed; defaults to the master seed")
    num_classes: int = Field(default=2, ge=2, alias="numClasses")
    normalizer: Literal["tanh", "minmax"] = Field(default="tanh", description="Form of phi")
    readout: Literal["first", "projection"] = Field(
        default="first",
        description="Class scores: first C expectations, or fixed random projection U -> C"
    )
    init_scale: float = Field(
        default=0.1, ge=0,
        description="Std of the Gaussian initial angles",
        alias="initScale"
    )

    @model_validator(mode="after")
    def _check_lr(self) -> "TrainConfig":
        if isinstance(self.lr, float) and self.lr < 0:
            raise ValueError("lr must be >= 0")
        return self


class MetricsRow(BaseConfigModel):
    """One epoch of training history."""
    epoch: int = Field(ge=0)
    train_loss: float = Field(ge=0, alias="trainLoss")
    train_accuracy: float = Field(ge=0, le=1, alias="trainAccuracy")
    test_loss: float = Field(ge=0, alias="testLoss")
    test_accuracy: float = Field(ge=0, le=1, alias="testAccuracy")
    mean_grad_norm: float = Field(ge=0, alias="meanGradNorm")
    wallclock_seconds: float = Field(default=0.0, ge=0, alias="wallclockSeconds")
