"""Pydantic models for experiment configuration and records."""

from .ansatz import AnsatzSpec, EvalMode
from .blocks import (
    EmbeddingBlockSpec,
    FcHeadSpec,
    FeatureBlockSpec,
    HeadSpec,
    IdentityBlockSpec,
    PcaBlockSpec,
    TtnBlockSpec,
    TtnPretrainSpec,
    VqcHeadSpec,
)
from .checkpoint import BlockReference, FcState, ModelCheckpoint, NormalizerState, PcaCheckpoint
from .dataset import (
    CsvDatasetSpec,
    DatasetSpec,
    EmbeddingDatasetSpec,
    QuantumDotDatasetSpec,
    TfbsDatasetSpec,
)
from .experiment import ExperimentConfig, Variants
from .noise import NoiseModel
from .report import BoundReport, TheoryConfig
from .training import MetricsRow, Theorem3Schedule, TrainConfig

__all__ = [
    "AnsatzSpec",
    "EvalMode",
    "EmbeddingBlockSpec",
    "FcHeadSpec",
    "FeatureBlockSpec",
    "HeadSpec",
    "IdentityBlockSpec",
    "PcaBlockSpec",
    "TtnBlockSpec",
    "TtnPretrainSpec",
    "VqcHeadSpec",
    "BlockReference",
    "FcState",
    "ModelCheckpoint",
    "NormalizerState",
    "PcaCheckpoint",
    "CsvDatasetSpec",
    "DatasetSpec",
    "EmbeddingDatasetSpec",
    "QuantumDotDatasetSpec",
    "TfbsDatasetSpec",
    "ExperimentConfig",
    "Variants",
    "NoiseModel",
    "BoundReport",
    "TheoryConfig",
    "MetricsRow",
    "Theorem3Schedule",
    "TrainConfig",
]
