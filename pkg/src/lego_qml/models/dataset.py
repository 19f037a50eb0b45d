"""Dataset source models."""

from typing import Annotated, Literal, Optional, Union

from pydantic import Field

from .base import BaseConfigModel


class QuantumDotDatasetSpec(BaseConfigModel):
    """Synthetic 50x50 charge stability diagrams (single vs double dot)."""
    generator: Literal["quantum-dot"] = "quantum-dot"
    n: int = Field(default=400, ge=2)
    noise_level: float = Field(default=0.0, ge=0, le=1, alias="noiseLevel")
    seed: Optional[int] = Field(default=None, description="Defaults to the master seed")

    @property
    def feature_dim(self) -> int:
        return 50 * 50


class TfbsDatasetSpec(BaseConfigModel):
    """Synthetic 101-base sequences with a planted binding motif."""
    generator: Literal["tfbs"] = "tfbs"
    n: int = Field(default=1000, ge=2)
    motif: str = Field(default="TGACTCA", description="Motif planted in positive sequences")
    mutate: bool = Field(default=False, description="Allow one random point mutation inside the motif")
    seed: Optional[int] = Field(default=None)

    @property
    def feature_dim(self) -> int:
        return 4 * 101


class CsvDatasetSpec(BaseConfigModel):
    """Dataset CSV with columns f0..f{D-1},label; sample ids are row indices."""
    generator: Literal["csv"] = "csv"
    path: str


class EmbeddingDatasetSpec(BaseConfigModel):
    """Labels CSV (id,label) whose ids index an embedding feature block."""
    generator: Literal["embedding"] = "embedding"
    labels: str


DatasetSource = Annotated[
    Union[QuantumDotDatasetSpec, TfbsDatasetSpec, CsvDatasetSpec, EmbeddingDatasetSpec],
    Field(discriminator="generator"),
]


class DatasetSpec(BaseConfigModel):
    """Dataset source plus the stratified train/test split."""
    source: DatasetSource
    test_fraction: float = Field(default=0.2, gt=0, lt=1, alias="testFraction")
    split_seed: Optional[int] = Field(default=None, description="Defaults to the master seed", alias="splitSeed")
