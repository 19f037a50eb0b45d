"""Experiment configuration model."""

from typing import Literal, Optional

from pydantic import Field, model_validator

from .base import BaseConfigModel
from .blocks import FeatureBlockSpec, HeadSpec, VqcHeadSpec
from .dataset import DatasetSpec
from .noise import NoiseModel
from .report import TheoryConfig
from .training import TrainConfig

SCHEMA_VERSION = 1


class Variants(BaseConfigModel):
    """Alternative blocks and heads, selected by kind in block/head sweeps."""
    blocks: list[FeatureBlockSpec] = Field(default_factory=list)
    heads: list[HeadSpec] = Field(default_factory=list)


class ExperimentConfig(BaseConfigModel):
    """Complete experiment configuration: one dataset, one frozen block, one head."""
    schema_version: Literal[1] = Field(default=SCHEMA_VERSION, alias="schemaVersion")
    run_name: str = Field(description="Run name, used as the output subdirectory", alias="runName")
    seed: int = Field(default=0, description="Master seed")
    dataset: DatasetSpec
    feature_block: FeatureBlockSpec = Field(alias="featureBlock")
    head: HeadSpec
    training: TrainConfig = Field(default_factory=TrainConfig)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    theory: TheoryConfig = Field(default_factory=TheoryConfig)
    variants: Variants = Field(default_factory=Variants)
    output_dir: str = Field(default="runs", alias="outputDir")
    deterministic_outputs: bool = Field(
        default=True,
        description="Leave wallclock_s empty in metrics CSV so re-runs are byte-identical",
        alias="deterministicOutputs"
    )
    allow_budget_mismatch: bool = Field(default=False, alias="allowBudgetMismatch")

    @model_validator(mode="after")
    def _check_head(self) -> "ExperimentConfig":
        if isinstance(self.head, VqcHeadSpec) and self.training.num_classes > self.head.qubits \
                and self.training.readout == "first":
            raise ValueError(
                f"numClasses ({self.training.num_classes}) exceeds qubits ({self.head.qubits}); "
                "use readout 'projection'"
            )
        return self

    @property
    def training_seed(self) -> int:
        return self.training.seed if self.training.seed is not None else self.seed

    @property
    def block_width(self) -> int | None:
        """Output width U of the feature block, when known from the spec alone."""
        return getattr(self.feature_block, "components", None) or (
            self.head.qubits if isinstance(self.head, VqcHeadSpec) else None
        )

    @property
    def effective_noise(self) -> NoiseModel | None:
        mode_noise = self.training.eval_mode.noise
        if mode_noise is not None:
            return mode_noise
        return None if self.noise.is_noiseless else self.noise
