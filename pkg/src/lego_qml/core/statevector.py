"""Dense statevector simulation.

Basis index b encodes the register with qubit 0 as the least-significant bit.
Rotations follow R_A(theta) = exp(-i theta sigma_A / 2).
"""

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ..errors import ArgumentError, ConfigurationError, QubitIndexError, ShapeError

logger = logging.getLogger(__name__)

MAX_QUBITS = 24


class GateKind(enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    PX = "PX"
    PY = "PY"
    PZ = "PZ"
    CNOT = "CNOT"

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @property
    def is_two_qubit(self) -> bool:
        return self is GateKind.CNOT


@dataclass(frozen=True)
class Gate:
    """One gate; `qubits` is (target,) or (control, target)."""
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __repr__(self) -> str:
        if self.kind.is_rotation:
            return f"{self.kind.value}({self.qubits[0]}, {self.angle:.6g})"
        return f"{self.kind.value}({', '.join(map(str, self.qubits))})"


def rx(qubit: int, angle: float) -> Gate:
    return Gate(GateKind.RX, (qubit,), float(angle))


def ry(qubit: int, angle: float) -> Gate:
    return Gate(GateKind.RY, (qubit,), float(angle))


def rz(qubit: int, angle: float) -> Gate:
    return Gate(GateKind.RZ, (qubit,), float(angle))


def px(qubit: int) -> Gate:
    return Gate(GateKind.PX, (qubit,))


def py(qubit: int) -> Gate:
    return Gate(GateKind.PY, (qubit,))


def pz(qubit: int) -> Gate:
    return Gate(GateKind.PZ, (qubit,))


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (control, target))


PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)
"""I, X, Y, Z indexed by Pauli code 0..3."""

_PAULI_CODE = {GateKind.PX: 1, GateKind.PY: 2, GateKind.PZ: 3}


def rotation_matrix(kind: GateKind, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind is GateKind.RZ:
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=np.complex128)
    raise ArgumentError(f"{kind.value} is not a rotation")


def gate_matrix(gate: Gate) -> np.ndarray:
    """2x2 matrix of a single-qubit gate."""
    if gate.kind.is_rotation:
        return rotation_matrix(gate.kind, gate.angle)
    if gate.kind in _PAULI_CODE:
        return PAULI_MATRICES[_PAULI_CODE[gate.kind]]
    raise ArgumentError(f"{gate.kind.value} has no 2x2 matrix")


@dataclass
class StateVector:
    """2^U complex amplitudes of a U-qubit register."""
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ShapeError(
                f"expected {1 << self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.probabilities))


def check_qubit_count(num_qubits: int) -> None:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigurationError(
            f"qubit count must be between 1 and {MAX_QUBITS} (limit {MAX_QUBITS}), got {num_qubits}",
            field="num_qubits",
        )


def init_zero(num_qubits: int) -> StateVector:
    """|0...0> on `num_qubits` qubits."""
    check_qubit_count(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def basis_state(num_qubits: int, index: int) -> StateVector:
    check_qubit_count(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(num_qubits, amps)


def _validate(gate: Gate, num_qubits: int) -> None:
    for q in gate.qubits:
        if not 0 <= q < num_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {num_qubits}-qubit state in {gate!r}")
    if gate.kind.is_two_qubit and gate.qubits[0] == gate.qubits[1]:
        raise QubitIndexError(f"control equals target in {gate!r}")


@lru_cache(maxsize=256)
def cnot_pairs(control: int, target: int, num_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices (i, j) swapped by CNOT: control set, target 0 in i and 1 in j."""
    idx = np.arange(1 << num_qubits)
    mask = ((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)
    low = idx[mask]
    low.setflags(write=False)
    high = low | (1 << target)
    high.setflags(write=False)
    return low, high


def _apply_1q_inplace(amps: np.ndarray, matrix: np.ndarray, qubit: int, num_qubits: int) -> None:
    view = amps.reshape(1 << (num_qubits - 1 - qubit), 2, 1 << qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = matrix[0, 0] * a0 + matrix[0, 1] * a1
    view[:, 1, :] = matrix[1, 0] * a0 + matrix[1, 1] * a1


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply `gate` to `state` in place and return it."""
    _validate(gate, state.num_qubits)
    if gate.kind.is_two_qubit:
        low, high = cnot_pairs(gate.qubits[0], gate.qubits[1], state.num_qubits)
        amps = state.amplitudes
        amps[low], amps[high] = amps[high], amps[low].copy()
    else:
        _apply_1q_inplace(state.amplitudes, gate_matrix(gate), gate.qubits[0], state.num_qubits)
    return state


def apply_circuit(state: StateVector, gates: Sequence[Gate]) -> StateVector:
    """Apply gates left to right, in place."""
    for position, gate in enumerate(gates):
        try:
            apply_gate(state, gate)
        except QubitIndexError as e:
            raise QubitIndexError(f"gate {position}: {e}") from e
    return state


@lru_cache(maxsize=64)
def z_signs(num_qubits: int) -> np.ndarray:
    """(2^U, U) matrix of +1/-1: entry [b, u] = +1 iff bit u of b is 0."""
    idx = np.arange(1 << num_qubits)[:, None]
    bits = (idx >> np.arange(num_qubits)[None, :]) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


def expectation_z_all(state: StateVector) -> np.ndarray:
    """Exact <sigma_z^(u)> for every qubit u."""
    return state.probabilities @ z_signs(state.num_qubits)


@dataclass(frozen=True)
class ShotResult:
    """Per-qubit empirical means and raw counts keyed by bitstring (qubit 0 rightmost)."""
    means: np.ndarray
    counts: dict[str, int]
    shots: int


def sample_counts(probabilities: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts over basis states; rows of `probabilities` are sampled independently."""
    if shots < 1:
        raise ArgumentError(f"shots must be >= 1, got {shots}")
    p = np.clip(probabilities, 0.0, None)
    p = p / p.sum(axis=-1, keepdims=True)
    return rng.multinomial(shots, p)


def sample_shots(state: StateVector, shots: int, rng: np.random.Generator) -> ShotResult:
    """Draw `shots` computational-basis samples and estimate every <sigma_z^(u)>."""
    counts = sample_counts(state.probabilities, shots, rng)
    means = counts @ z_signs(state.num_qubits) / shots
    width = state.num_qubits
    raw = {format(int(b), f"0{width}b"): int(c) for b, c in enumerate(counts) if c}
    return ShotResult(means=means, counts=raw, shots=shots)


def states_equal(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    """Equality up to global phase."""
    if a.num_qubits != b.num_qubits:
        return False
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes))
    return bool(np.isclose(overlap, np.sqrt(a.norm() * b.norm()), atol=tol))


def random_circuit(num_qubits: int, n_gates: int, rng: np.random.Generator,
                   kinds: Iterable[GateKind] = (GateKind.RX, GateKind.RY, GateKind.RZ)) -> list[Gate]:
    """Random rotation circuit, with CNOTs when CNOT is among `kinds` and U > 1."""
    kinds = [k for k in kinds if not (k.is_two_qubit and num_qubits < 2)]
    gates = []
    for _ in range(n_gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind.is_two_qubit:
            c, t = rng.choice(num_qubits, size=2, replace=False)
            gates.append(cnot(int(c), int(t)))
        elif kind.is_rotation:
            gates.append(Gate(kind, (int(rng.integers(num_qubits)),), float(rng.uniform(-np.pi, np.pi))))
        else:
            gates.append(Gate(kind, (int(rng.integers(num_qubits)),)))
    return gates
