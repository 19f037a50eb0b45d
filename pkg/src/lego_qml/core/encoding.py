"""Tensor product encoder: normalized features -> separable RY product state."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, DataError, RangeError, ShapeError
from ..models import NormalizerState
from .statevector import StateVector, check_qubit_count

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
ANGLE_SCALE = np.pi / 2


@dataclass(frozen=True)
class NormalizerSpec:
    """Per-feature statistics behind phi. Arrays are read-only once fitted."""
    mean: np.ndarray
    std: np.ndarray
    kind: str = "tanh"
    minimum: np.ndarray | None = field(default=None)
    maximum: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        for arr in (self.mean, self.std, self.minimum, self.maximum):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    def to_state(self) -> NormalizerState:
        return NormalizerState(
            kind=self.kind,
            mean=self.mean.tolist(),
            std=self.std.tolist(),
            minimum=None if self.minimum is None else self.minimum.tolist(),
            maximum=None if self.maximum is None else self.maximum.tolist(),
        )

    @classmethod
    def from_state(cls, state: NormalizerState) -> "NormalizerSpec":
        return cls(
            mean=np.array(state.mean, dtype=np.float64),
            std=np.array(state.std, dtype=np.float64),
            kind=state.kind,
            minimum=None if state.minimum is None else np.array(state.minimum, dtype=np.float64),
            maximum=None if state.maximum is None else np.array(state.maximum, dtype=np.float64),
        )


def fit_normalizer(features: np.ndarray, kind: str = "tanh") -> NormalizerSpec:
    """Fit population mean/std (and min/max for the min-max variant) per column."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError(f"expected an n x U feature matrix, got shape {features.shape}")
    if features.shape[0] < 2:
        raise DataError(f"need at least 2 rows to fit a normalizer, got {features.shape[0]}")
    if kind not in ("tanh", "minmax"):
        raise ArgumentError(f"unknown normalizer kind {kind!r}")
    mean = features.mean(axis=0)
    std = np.maximum(features.std(axis=0), STD_FLOOR)
    if kind == "minmax":
        return NormalizerSpec(mean, std, kind, features.min(axis=0), features.max(axis=0))
    return NormalizerSpec(mean, std, kind)


def phi(spec: NormalizerSpec, raw: np.ndarray) -> np.ndarray:
    """Squash raw features into [-1, 1]; accepts a vector or an (n, U) matrix."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != spec.width:
        raise ShapeError(f"expected {spec.width} features, got {raw.shape[-1]}")
    if spec.kind == "minmax":
        span = np.maximum(spec.maximum - spec.minimum, STD_FLOOR)
        return np.clip(2.0 * (raw - spec.minimum) / span - 1.0, -1.0, 1.0)
    return np.tanh((raw - spec.mean) / spec.std)


def _check_range(phi_values: np.ndarray) -> None:
    if not np.all(np.isfinite(phi_values)) or np.any(np.abs(phi_values) > 1.0):
        raise RangeError("encoder inputs must lie in [-1, 1]")


def product_amplitudes(phi_batch: np.ndarray) -> np.ndarray:
    """(K, 2^U) amplitudes of the product states for a (K, U) batch of phi vectors."""
    phi_batch = np.atleast_2d(np.asarray(phi_batch, dtype=np.float64))
    _check_range(phi_batch)
    half = ANGLE_SCALE * phi_batch / 2.0
    cos, sin = np.cos(half), np.sin(half)
    amps = np.ones((phi_batch.shape[0], 1), dtype=np.float64)
    # Qubit 0 is the least-significant bit, so later qubits become the leading axis.
    for u in range(phi_batch.shape[1]):
        qubit = np.stack([cos[:, u], sin[:, u]], axis=1)
        amps = (qubit[:, :, None] * amps[:, None, :]).reshape(phi_batch.shape[0], -1)
    return amps.astype(np.complex128)


def encode_tpe(phi_vec: np.ndarray) -> StateVector:
    """Product state with qubit u rotated by RY((pi/2) phi_u) from |0>."""
    phi_vec = np.asarray(phi_vec, dtype=np.float64)
    if phi_vec.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {phi_vec.shape}")
    check_qubit_count(phi_vec.shape[0])
    return StateVector(phi_vec.shape[0], product_amplitudes(phi_vec[None, :])[0])
