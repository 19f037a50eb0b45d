"""NISQ noise emulation by stochastic Pauli trajectories.

Depolarizing noise uses the channel rho -> (1 - p) rho + p I/2: with probability
p an error event occurs and a Pauli is drawn uniformly from {I, X, Y, Z}, which
contracts <sigma_z> by exactly (1 - p). Dephasing independently inserts Z with
its own probability. A CNOT is followed, with probability p_pauli_2q, by one of
the 15 non-identity two-qubit Paulis.
"""

import logging
from typing import Sequence

import numpy as np

from ..errors import ArgumentError
from ..models import NoiseModel
from ..utils import chunked, ordered_map, spawn_seed, task_rng
from .statevector import (
    PAULI_MATRICES,
    Gate,
    StateVector,
    apply_circuit,
    expectation_z_all,
    px,
    py,
    pz,
    z_signs,
)

logger = logging.getLogger(__name__)

TRAJECTORY_CHUNK = 64

_PAULI_GATES = {1: px, 2: py, 3: pz}


def sample_gate_noise(model: NoiseModel, gate: Gate, rng: np.random.Generator) -> list[Gate]:
    """Pauli gates to insert after `gate` on one trajectory."""
    inserted: list[Gate] = []
    if gate.kind.is_two_qubit:
        if model.p_pauli_2q > 0 and rng.random() < model.p_pauli_2q:
            a, b = divmod(int(rng.integers(1, 16)), 4)
            control, target = gate.qubits
            if a:
                inserted.append(_PAULI_GATES[a](control))
            if b:
                inserted.append(_PAULI_GATES[b](target))
        return inserted
    qubit = gate.qubits[0]
    if model.p_depol_1q > 0 and rng.random() < model.p_depol_1q:
        code = int(rng.integers(0, 4))
        if code:
            inserted.append(_PAULI_GATES[code](qubit))
    if model.p_dephase_1q > 0 and rng.random() < model.p_dephase_1q:
        inserted.append(pz(qubit))
    return inserted


def single_qubit_error_matrices(model: NoiseModel, rows: int, rng: np.random.Generator) -> np.ndarray | None:
    """Per-row 2x2 Pauli error after a single-qubit gate, or None when no row is hit."""
    codes = np.zeros(rows, dtype=np.int64)
    dephase = np.zeros(rows, dtype=bool)
    if model.p_depol_1q > 0:
        hit = rng.random(rows) < model.p_depol_1q
        codes = np.where(hit, rng.integers(0, 4, size=rows), 0)
    if model.p_dephase_1q > 0:
        dephase = rng.random(rows) < model.p_dephase_1q
    if not codes.any() and not dephase.any():
        return None
    mats = PAULI_MATRICES[codes]
    if dephase.any():
        mats = np.where(dephase[:, None, None], PAULI_MATRICES[3] @ mats, mats)
    return mats


def two_qubit_error_codes(model: NoiseModel, rows: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-row Pauli codes (control, target) after a CNOT, or None when no row is hit."""
    if model.p_pauli_2q <= 0:
        return None
    hit = rng.random(rows) < model.p_pauli_2q
    pair = np.where(hit, rng.integers(1, 16, size=rows), 0)
    if not pair.any():
        return None
    return pair // 4, pair % 4


def apply_readout_expectation(z: np.ndarray, q: float) -> np.ndarray:
    """Symmetric independent readout flips scale every <sigma_z> by (1 - 2q)."""
    if not 0.0 <= q <= 0.5:
        raise ArgumentError(f"readout flip probability must lie in [0, 0.5], got {q}")
    return (1.0 - 2.0 * q) * np.asarray(z, dtype=np.float64)


def sample_readout_means(counts: np.ndarray, num_qubits: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Per-qubit shot means after flipping each measured bit with probability q.

    `counts` has shape (..., 2^U); the result has shape (..., U).
    """
    shots = counts.sum(axis=-1, keepdims=True)
    bits = (1.0 - z_signs(num_qubits)) / 2.0
    ones = np.rint(counts @ bits).astype(np.int64)
    if q > 0:
        zeros = shots.astype(np.int64) - ones
        ones = ones - rng.binomial(ones, q) + rng.binomial(zeros, q)
    return (shots - 2.0 * ones) / shots


def inject_measurement_noise(z: np.ndarray, tau: float, rng: np.random.Generator) -> np.ndarray:
    """z + xi with xi ~ N(0, tau^2/U I), so E||xi||^2 = tau^2. Not clamped."""
    if tau < 0:
        raise ArgumentError(f"tau must be >= 0, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    if tau == 0:
        return z.copy()
    width = z.shape[-1]
    return z + rng.normal(0.0, tau / np.sqrt(width), size=z.shape)


def _run_trajectory(circuit: Sequence[Gate], init: StateVector, model: NoiseModel,
                    rng: np.random.Generator) -> np.ndarray:
    state = init.copy()
    for gate in circuit:
        apply_circuit(state, [gate])
        inserted = sample_gate_noise(model, gate, rng)
        if inserted:
            apply_circuit(state, inserted)
    return expectation_z_all(state)


def trajectory_expectations(circuit: Sequence[Gate], init: StateVector, model: NoiseModel,
                            rng: np.random.Generator, workers: int = 1) -> np.ndarray:
    """(n_trajectories, U) exact expectations of each stochastic-Pauli trajectory.

    Trajectories run in fixed chunks with streams keyed by (seed, chunk index).
    """
    seed = spawn_seed(rng)

    def run_chunk(indexed: tuple[int, range]) -> np.ndarray:
        chunk_index, rows = indexed
        chunk_rng = task_rng(seed, chunk_index)
        return np.stack([_run_trajectory(circuit, init, model, chunk_rng) for _ in rows])

    chunks = list(enumerate(chunked(model.n_trajectories, TRAJECTORY_CHUNK)))
    return np.concatenate(ordered_map(run_chunk, chunks, workers), axis=0)


def noisy_expectation(circuit: Sequence[Gate], init: StateVector, model: NoiseModel,
                      rng: np.random.Generator, workers: int = 1) -> np.ndarray:
    """Trajectory-averaged <sigma_z> with analytic readout scaling."""
    if not model.has_gate_noise:
        z = expectation_z_all(apply_circuit(init.copy(), circuit))
    else:
        z = trajectory_expectations(circuit, init, model, rng, workers).mean(axis=0)
    if model.p_readout_flip:
        z = apply_readout_expectation(z, model.p_readout_flip)
    return z


def is_noise_free(model: NoiseModel | None) -> bool:
    return model is None or model.is_noiseless


def describe(model: NoiseModel) -> str:
    parts = [
        f"depol={model.p_depol_1q:g}",
        f"dephase={model.p_dephase_1q:g}",
        f"pauli2q={model.p_pauli_2q:g}",
        f"readout={model.p_readout_flip:g}",
        f"tau={model.tau_meas:g}",
    ]
    if model.has_gate_noise:
        parts.append(f"trajectories={model.n_trajectories}")
    return " ".join(parts)
