"""Variational quantum circuit head: ansatz, forward pass and gradients.

Parameter layout is layer-major, then qubit-major, then (alpha, beta, gamma)
for the RX, RY, RZ angles of that qubit.
"""

import logging

import numpy as np

from ..errors import ArgumentError, ShapeError, UnsupportedModeError
from ..models import AnsatzSpec, EvalMode
from ..utils import chunked, ordered_map, task_rng
from .executor import CircuitExecutor
from .statevector import Gate, StateVector, cnot, rx, ry, rz

logger = logging.getLogger(__name__)

SHIFT = np.pi / 2
SHIFT_COEFFICIENT = 0.5

# Samples per gradient task; fixed so shot-mode streams do not depend on worker count.
GRADIENT_GROUP = 8


def _check_theta(spec: AnsatzSpec, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.param_count,):
        raise ShapeError(f"theta must have length 3*U*D = {spec.param_count}, got shape {theta.shape}")
    return theta


def _check_state(spec: AnsatzSpec, state: StateVector) -> None:
    if state.num_qubits != spec.num_qubits:
        raise ShapeError(f"input state has {state.num_qubits} qubits, ansatz expects {spec.num_qubits}")


def init_theta(spec: AnsatzSpec, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    return rng.normal(0.0, scale, size=spec.param_count)


def build_circuit(spec: AnsatzSpec, theta: np.ndarray) -> list[Gate]:
    """Expand the ansatz into gates: per layer RX, RY, RZ on every qubit, then the entangler."""
    theta = _check_theta(spec, theta).reshape(spec.depth, spec.num_qubits, 3)
    gates: list[Gate] = []
    for layer in theta:
        for u, (alpha, beta, gamma) in enumerate(layer):
            gates.extend((rx(u, alpha), ry(u, beta), rz(u, gamma)))
        gates.extend(cnot(c, t) for c, t in spec.entangler_pairs)
    return gates


def forward(spec: AnsatzSpec, theta: np.ndarray, input_state: StateVector, mode: EvalMode,
            rng: np.random.Generator | None = None, executor: CircuitExecutor | None = None) -> np.ndarray:
    """Per-qubit <sigma_z> after the ansatz acts on `input_state`."""
    theta = _check_theta(spec, theta)
    _check_state(spec, input_state)
    executor = executor or CircuitExecutor(spec)
    return executor.expectations(theta[None, :], input_state.amplitudes[None, :], mode, rng)[0]


def _shifted_thetas(theta: np.ndarray) -> np.ndarray:
    """(2P, P) rows: theta + SHIFT e_j for every j, then theta - SHIFT e_j for every j."""
    p = theta.shape[0]
    shifts = SHIFT * np.eye(p)
    return np.concatenate([theta + shifts, theta - shifts], axis=0)


def _combine_shifts(z: np.ndarray, p: int) -> np.ndarray:
    """(..., 2P, U) shifted expectations -> (..., U, P) Jacobian."""
    plus, minus = z[..., :p, :], z[..., p:, :]
    return np.swapaxes(SHIFT_COEFFICIENT * (plus - minus), -1, -2)


def grad_parameter_shift(spec: AnsatzSpec, theta: np.ndarray, input_state: StateVector, mode: EvalMode,
                         rng: np.random.Generator | None = None,
                         executor: CircuitExecutor | None = None) -> np.ndarray:
    """(U, P) Jacobian of the expectations from 2P shifted executions."""
    theta = _check_theta(spec, theta)
    _check_state(spec, input_state)
    executor = executor or CircuitExecutor(spec)
    p = spec.param_count
    states = np.repeat(input_state.amplitudes[None, :], 2 * p, axis=0)
    z = executor.expectations(_shifted_thetas(theta), states, mode, rng)
    return _combine_shifts(z, p)


def jacobians(executor: CircuitExecutor, theta: np.ndarray, states: np.ndarray, mode: EvalMode,
              stream: tuple[int, ...] = (0,), workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Expectations (K, U) and parameter-shift Jacobians (K, U, P) for K input states.

    Samples are processed in fixed groups, each with its own random stream keyed
    by (*stream, group index).
    """
    spec = executor.spec
    theta = _check_theta(spec, theta)
    p = spec.param_count
    shifted = _shifted_thetas(theta)
    rows = np.concatenate([theta[None, :], shifted], axis=0)

    def run_group(indexed: tuple[int, range]) -> tuple[np.ndarray, np.ndarray]:
        group, samples = indexed
        rng = task_rng(*stream, group)
        k = len(samples)
        block = states[samples.start:samples.stop]
        z = executor.expectations(
            np.tile(rows, (k, 1)), np.repeat(block, 2 * p + 1, axis=0), mode, rng
        ).reshape(k, 2 * p + 1, -1)
        return z[:, 0, :], _combine_shifts(z[:, 1:, :], p)

    groups = list(enumerate(chunked(states.shape[0], GRADIENT_GROUP)))
    results = ordered_map(run_group, groups, workers)
    values = np.concatenate([r[0] for r in results], axis=0)
    jac = np.concatenate([r[1] for r in results], axis=0)
    return values, jac


def grad_finite_difference(spec: AnsatzSpec, theta: np.ndarray, input_state: StateVector,
                           step: float = 1e-4, mode: EvalMode | None = None) -> np.ndarray:
    """(U, P) central-difference Jacobian; analytic noiseless mode only."""
    if mode is not None and (mode.kind != "analytic" or (mode.noise is not None and not mode.noise.is_noiseless)):
        raise UnsupportedModeError("finite differences require analytic, noiseless evaluation")
    if not 1e-6 <= step <= 1e-3:
        raise ArgumentError(f"step must lie in [1e-6, 1e-3], got {step}")
    theta = _check_theta(spec, theta)
    _check_state(spec, input_state)
    p = spec.param_count
    shifts = step * np.eye(p)
    rows = np.concatenate([theta + shifts, theta - shifts], axis=0)
    states = np.repeat(input_state.amplitudes[None, :], 2 * p, axis=0)
    z = CircuitExecutor(spec).expectations(rows, states, EvalMode.analytic())
    return ((z[:p] - z[p:]) / (2.0 * step)).T
