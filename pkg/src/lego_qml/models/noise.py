"""Noise model configuration."""

from pydantic import Field

from .base import BaseConfigModel


class NoiseModel(BaseConfigModel):
    """Stochastic-Pauli gate noise, readout flips and additive measurement noise."""
    p_depol_1q: float = Field(
        default=0.0, ge=0.0, lt=1.0,
        description="Depolarizing probability per single-qubit gate",
        alias="pDepol1q"
    )
    p_dephase_1q: float = Field(
        default=0.0, ge=0.0, lt=1.0,
        description="Dephasing (Z flip) probability per single-qubit gate",
        alias="pDephase1q"
    )
    p_pauli_2q: float = Field(
        default=0.0, ge=0.0, lt=1.0,
        description="Two-qubit Pauli error probability per CNOT",
        alias="pPauli2q"
    )
    p_readout_flip: float = Field(
        default=0.0, ge=0.0, le=0.5,
        description="Per-qubit classical bit-flip probability on readout",
        alias="pReadoutFlip"
    )
    tau_meas: float = Field(
        default=0.0, ge=0.0,
        description="Additive measurement-noise scale tau",
        alias="tauMeas"
    )
    n_trajectories: int = Field(
        default=256, ge=1,
        description="Stochastic-Pauli trajectories averaged per evaluation",
        alias="nTrajectories"
    )

    @property
    def has_gate_noise(self) -> bool:
        return self.p_depol_1q > 0 or self.p_dephase_1q > 0 or self.p_pauli_2q > 0

    @property
    def is_noiseless(self) -> bool:
        return not self.has_gate_noise and self.p_readout_flip == 0 and self.tau_meas == 0
