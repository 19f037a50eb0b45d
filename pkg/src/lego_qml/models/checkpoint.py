"""Persisted block and model checkpoints."""

from typing import Literal, Optional

from pydantic import Field

from .ansatz import AnsatzSpec
from .base import BaseConfigModel


class PcaCheckpoint(BaseConfigModel):
    """Fitted PCA block."""
    kind: Literal["pca"] = "pca"
    mean: list[float]
    components: list[list[float]]
    eigenvalues: list[float]
    checksum: str
    seed: Optional[int] = None
    source_config_hash: Optional[str] = Field(default=None, alias="configHash")


class NormalizerState(BaseConfigModel):
    """Fitted phi normalizer."""
    kind: Literal["tanh", "minmax"] = "tanh"
    mean: list[float]
    std: list[float]
    minimum: Optional[list[float]] = None
    maximum: Optional[list[float]] = None


class BlockReference(BaseConfigModel):
    """Where the frozen block lives and what its content checksum must be."""
    kind: Literal["pca", "ttn", "embedding", "identity"]
    checksum: str
    path: Optional[str] = Field(default=None, description="TTN or embedding file")
    pca: Optional[PcaCheckpoint] = Field(default=None, description="Inline PCA data")
    width: Optional[int] = Field(default=None, description="Identity block width")


class FcState(BaseConfigModel):
    weight: list[list[float]]
    bias: list[float]


class ModelCheckpoint(BaseConfigModel):
    """Everything needed to evaluate a trained assembly."""
    block: BlockReference
    normalizer: NormalizerState
    ansatz: Optional[AnsatzSpec] = None
    theta: Optional[list[float]] = None
    fc: Optional[FcState] = None
    readout: Literal["first", "projection"] = "first"
    num_classes: int = Field(alias="numClasses")
    projection_seed: int = Field(default=0, alias="projectionSeed")
    source_config_hash: str = Field(alias="configHash")
    seed: int
