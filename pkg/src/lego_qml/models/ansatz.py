"""VQC layout and evaluation-mode models."""

from typing import Literal, Optional

from pydantic import Field, model_validator

from .base import BaseConfigModel
from .noise import NoiseModel


class AnsatzSpec(BaseConfigModel):
    """Layered RX/RY/RZ + CNOT ansatz."""
    num_qubits: int = Field(ge=1, le=24, description="Number of qubits U", alias="numQubits")
    depth: int = Field(default=1, ge=1, description="Number of layers D")
    entangler: Literal["linear-chain", "ring"] = Field(
        default="linear-chain",
        description="CNOT pattern after each rotation layer"
    )
    measure_qubits: int = Field(
        default=2, ge=1,
        description="Number C of leading qubits read out for classification",
        alias="measureQubits"
    )

    @model_validator(mode="after")
    def _check_measure(self) -> "AnsatzSpec":
        if self.measure_qubits > self.num_qubits:
            raise ValueError(f"measureQubits ({self.measure_qubits}) exceeds numQubits ({self.num_qubits})")
        return self

    @property
    def param_count(self) -> int:
        return 3 * self.num_qubits * self.depth

    @property
    def entangler_pairs(self) -> list[tuple[int, int]]:
        pairs = [(u, u + 1) for u in range(self.num_qubits - 1)]
        if self.entangler == "ring" and self.num_qubits > 1:
            pairs.append((self.num_qubits - 1, 0))
        return pairs


class EvalMode(BaseConfigModel):
    """How expectations are obtained: exact, or estimated from M shots."""
    kind: Literal["analytic", "shots"] = Field(default="analytic")
    shots: Optional[int] = Field(default=None, ge=1, description="Shot count M in shots mode")
    noise: Optional[NoiseModel] = Field(default=None)

    @model_validator(mode="after")
    def _check_shots(self) -> "EvalMode":
        if self.kind == "shots" and self.shots is None:
            raise ValueError("shots mode requires 'shots' >= 1")
        return self

    @classmethod
    def analytic(cls, noise: NoiseModel | None = None) -> "EvalMode":
        return cls(kind="analytic", noise=noise)

    @classmethod
    def with_shots(cls, shots: int, noise: NoiseModel | None = None) -> "EvalMode":
        return cls(kind="shots", shots=shots, noise=noise)
