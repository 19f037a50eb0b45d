"""Feature-block and head configuration models."""

from typing import Annotated, Literal, Optional, Union

from pydantic import Field, model_validator

from .base import BaseConfigModel


class PcaBlockSpec(BaseConfigModel):
    """PCA block: fitted on the training split unless a checkpoint is given."""
    kind: Literal["pca"] = "pca"
    components: int = Field(ge=1, description="Output dimension U")
    checkpoint: Optional[str] = Field(default=None, description="Pre-fitted PCA checkpoint (JSON)")


class TtnPretrainSpec(BaseConfigModel):
    """Source task D_A used to pretrain a TTN block before it is frozen."""
    generator: Literal["quantum-dot", "tfbs"] = Field(default="quantum-dot")
    n: int = Field(default=400, ge=2)
    noise_level: float = Field(default=0.0, ge=0, le=1, alias="noiseLevel")
    seed: int = Field(default=1000, description="Must differ from the downstream dataset seed")
    epochs: int = Field(default=100, ge=0)
    lr: float = Field(default=0.01, ge=0)
    batch_size: int = Field(default=32, ge=1, alias="batchSize")


class TtnBlockSpec(BaseConfigModel):
    """Tensor-train matrix block."""
    kind: Literal["ttn"] = "ttn"
    input_factors: list[int] = Field(description="m_k with prod = D_in", alias="inputFactors")
    output_factors: list[int] = Field(description="n_k with prod = U", alias="outputFactors")
    ranks: list[int] = Field(description="Internal bond ranks r_1..r_{N-1}")
    checkpoint: Optional[str] = Field(default=None, description="TTN checkpoint (binary)")
    pretrain: Optional[TtnPretrainSpec] = Field(default=None)
    init_seed: int = Field(default=0, alias="initSeed")

    @model_validator(mode="after")
    def _check_lengths(self) -> "TtnBlockSpec":
        n = len(self.input_factors)
        if n == 0 or len(self.output_factors) != n or len(self.ranks) != n - 1:
            raise ValueError("need N input factors, N output factors and N-1 ranks")
        if min(self.input_factors + self.output_factors + (self.ranks or [1])) < 1:
            raise ValueError("factors and ranks must be positive")
        return self

    @property
    def components(self) -> int:
        out = 1
        for f in self.output_factors:
            out *= f
        return out


class EmbeddingBlockSpec(BaseConfigModel):
    """Precomputed embeddings keyed by sample id."""
    kind: Literal["embedding"] = "embedding"
    path: str = Field(description="Binary embedding file (LEGOEMB1)")


class IdentityBlockSpec(BaseConfigModel):
    """Pass-through block; requires D_in == U."""
    kind: Literal["identity"] = "identity"


FeatureBlockSpec = Annotated[
    Union[PcaBlockSpec, TtnBlockSpec, EmbeddingBlockSpec, IdentityBlockSpec],
    Field(discriminator="kind"),
]


class VqcHeadSpec(BaseConfigModel):
    """Variational quantum circuit head."""
    kind: Literal["vqc"] = "vqc"
    qubits: int = Field(ge=1, le=24)
    depth: int = Field(default=1, ge=1)
    entangler: Literal["linear-chain", "ring"] = Field(default="linear-chain")

    def param_count(self, num_classes: int, inputs: int | None = None) -> int:
        return 3 * self.qubits * self.depth


class FcHeadSpec(BaseConfigModel):
    """Trainable linear softmax head (classical baseline)."""
    kind: Literal["fc"] = "fc"
    inputs: Optional[int] = Field(default=None, ge=1, description="Input width U; defaults to the block output")

    def param_count(self, num_classes: int, inputs: int | None = None) -> int:
        width = inputs if inputs is not None else self.inputs
        return num_classes * (width + 1)


HeadSpec = Annotated[Union[VqcHeadSpec, FcHeadSpec], Field(discriminator="kind")]
