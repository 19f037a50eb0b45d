"""Batched execution of the layered ansatz.

Each row of a batch is one circuit execution with its own parameter vector and
input state. Without gate noise, the RX-RY-RZ triple on a qubit is fused into a
single 2x2 update and a whole CNOT sublayer into one index permutation; with
gate noise every gate is applied separately so Pauli errors land between them.
"""

import logging
import threading
from functools import lru_cache

import numpy as np

from ..errors import ShapeError
from ..models import AnsatzSpec, EvalMode, NoiseModel
from .noise import (
    apply_readout_expectation,
    inject_measurement_noise,
    sample_readout_means,
    single_qubit_error_matrices,
    two_qubit_error_codes,
)
from .statevector import PAULI_MATRICES, GateKind, sample_counts, z_signs

logger = logging.getLogger(__name__)

MAX_ROWS = 4096


def rotation_stack(kind: GateKind, angles: np.ndarray) -> np.ndarray:
    """(K, 2, 2) rotation matrices for K angles."""
    half = np.asarray(angles, dtype=np.float64) / 2.0
    c, s = np.cos(half), np.sin(half)
    out = np.zeros(half.shape + (2, 2), dtype=np.complex128)
    if kind is GateKind.RX:
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind is GateKind.RY:
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    else:
        out[..., 0, 0] = np.exp(-1j * half)
        out[..., 1, 1] = np.exp(1j * half)
    return out


def apply_1q_rows(amps: np.ndarray, mats: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """Apply a 2x2 matrix per row (mats (K,2,2)) or shared (mats (2,2)) to `qubit`."""
    rows = amps.shape[0]
    view = amps.reshape(rows, 1 << (num_qubits - 1 - qubit), 2, 1 << qubit)
    a0, a1 = view[:, :, 0, :], view[:, :, 1, :]
    if mats.ndim == 2:
        m00, m01, m10, m11 = mats[0, 0], mats[0, 1], mats[1, 0], mats[1, 1]
    else:
        m00, m01, m10, m11 = (mats[:, i, j][:, None, None] for i in (0, 1) for j in (0, 1))
    out = np.empty_like(view)
    out[:, :, 0, :] = m00 * a0 + m01 * a1
    out[:, :, 1, :] = m10 * a0 + m11 * a1
    return out.reshape(rows, -1)


@lru_cache(maxsize=256)
def cnot_permutation(control: int, target: int, num_qubits: int) -> np.ndarray:
    """Gather index p with new[b] = old[p[b]] for CNOT(control, target)."""
    idx = np.arange(1 << num_qubits)
    perm = np.where((idx >> control) & 1 == 1, idx ^ (1 << target), idx)
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=64)
def entangler_permutation(pairs: tuple[tuple[int, int], ...], num_qubits: int) -> np.ndarray:
    """Single gather index equivalent to applying the CNOTs in `pairs` in order."""
    total = np.arange(1 << num_qubits)
    for control, target in pairs:
        total = total[cnot_permutation(control, target, num_qubits)]
    total.setflags(write=False)
    return total


def param_index(spec: AnsatzSpec, layer: int, qubit: int, axis: int) -> int:
    """Position of angle `axis` (0=alpha, 1=beta, 2=gamma) of `qubit` in `layer`."""
    return (layer * spec.num_qubits + qubit) * 3 + axis


def _apply_pauli_codes(amps: np.ndarray, codes: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    if not codes.any():
        return amps
    return apply_1q_rows(amps, PAULI_MATRICES[codes], qubit, num_qubits)


class CircuitExecutor:
    """Runs the ansatz on batches of (theta, input state) rows and counts executions."""

    def __init__(self, spec: AnsatzSpec):
        self.spec = spec
        self.executions = 0
        self._lock = threading.Lock()

    def final_amplitudes(self, thetas: np.ndarray, states: np.ndarray,
                         noise: NoiseModel | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
        """Output amplitudes per row (one trajectory per row when `noise` has gate noise)."""
        spec = self.spec
        n = spec.num_qubits
        amps = np.array(states, dtype=np.complex128, copy=True)
        noisy = noise is not None and noise.has_gate_noise
        perm = entangler_permutation(tuple(spec.entangler_pairs), n)
        for layer in range(spec.depth):
            for u in range(n):
                angles = [thetas[:, param_index(spec, layer, u, a)] for a in range(3)]
                if noisy:
                    for kind, angle in zip((GateKind.RX, GateKind.RY, GateKind.RZ), angles):
                        amps = apply_1q_rows(amps, rotation_stack(kind, angle), u, n)
                        errors = single_qubit_error_matrices(noise, amps.shape[0], rng)
                        if errors is not None:
                            amps = apply_1q_rows(amps, errors, u, n)
                else:
                    fused = (rotation_stack(GateKind.RZ, angles[2])
                             @ rotation_stack(GateKind.RY, angles[1])
                             @ rotation_stack(GateKind.RX, angles[0]))
                    amps = apply_1q_rows(amps, fused, u, n)
            if noisy:
                for control, target in spec.entangler_pairs:
                    amps = amps[:, cnot_permutation(control, target, n)]
                    codes = two_qubit_error_codes(noise, amps.shape[0], rng)
                    if codes is not None:
                        amps = _apply_pauli_codes(amps, codes[0], control, n)
                        amps = _apply_pauli_codes(amps, codes[1], target, n)
            elif spec.entangler_pairs:
                amps = amps[:, perm]
        return amps

    def probabilities(self, thetas: np.ndarray, states: np.ndarray,
                      noise: NoiseModel | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
        """(K, 2^U) outcome distribution per row, averaged over noise trajectories."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        states = np.atleast_2d(states)
        rows = thetas.shape[0]
        if thetas.shape[1] != self.spec.param_count:
            raise ShapeError(f"expected {self.spec.param_count} angles per row, got {thetas.shape[1]}")
        if states.shape != (rows, 1 << self.spec.num_qubits):
            raise ShapeError(
                f"expected input states of shape {(rows, 1 << self.spec.num_qubits)}, got {states.shape}"
            )
        with self._lock:
            self.executions += rows
        trajectories = noise.n_trajectories if noise is not None and noise.has_gate_noise else 1
        per_chunk = max(1, MAX_ROWS // trajectories)
        out = np.empty((rows, 1 << self.spec.num_qubits), dtype=np.float64)
        for start in range(0, rows, per_chunk):
            stop = min(start + per_chunk, rows)
            t = np.repeat(thetas[start:stop], trajectories, axis=0)
            s = np.repeat(states[start:stop], trajectories, axis=0)
            probs = np.abs(self.final_amplitudes(t, s, noise, rng)) ** 2
            out[start:stop] = probs.reshape(stop - start, trajectories, -1).mean(axis=1)
        return out

    def expectations(self, thetas: np.ndarray, states: np.ndarray, mode: EvalMode,
                     rng: np.random.Generator | None = None) -> np.ndarray:
        """(K, U) z-expectations per row under `mode`.

        Order: trajectory averaging, then readout (analytic scaling or sampled
        flips), then additive measurement noise.
        """
        noise = mode.noise
        probs = self.probabilities(thetas, states, noise, rng)
        n = self.spec.num_qubits
        q = noise.p_readout_flip if noise is not None else 0.0
        if mode.kind == "shots":
            counts = sample_counts(probs, mode.shots, rng)
            z = sample_readout_means(counts, n, q, rng)
        else:
            z = probs @ z_signs(n)
            if q:
                z = apply_readout_expectation(z, q)
        if noise is not None and noise.tau_meas > 0:
            z = inject_measurement_noise(z, noise.tau_meas, rng)
        return z
