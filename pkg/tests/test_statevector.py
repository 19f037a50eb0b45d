import numpy as np
import pytest

from lego_qml.errors import ArgumentError, ConfigurationError, QubitIndexError
from lego_qml.core.statevector import (
    GateKind,
    apply_circuit,
    basis_state,
    cnot,
    expectation_z_all,
    init_zero,
    px,
    random_circuit,
    rotation_matrix,
    rx,
    ry,
    rz,
    sample_shots,
    states_equal,
)
from lego_qml.utils import task_rng


def test_init_zero_has_all_expectations_plus_one():
    state = init_zero(3)
    assert state.amplitudes[0] == 1.0
    np.testing.assert_allclose(expectation_z_all(state), [1.0, 1.0, 1.0])


@pytest.mark.parametrize("qubits", [0, 25])
def test_qubit_cap(qubits):
    with pytest.raises(ConfigurationError):
        init_zero(qubits)


def test_qubit_zero_is_least_significant_bit():
    state = apply_circuit(init_zero(2), [px(0)])
    assert abs(state.amplitudes[1]) == pytest.approx(1.0)
    np.testing.assert_allclose(expectation_z_all(state), [-1.0, 1.0])


def test_ry_pi_flips_and_rx_half_turn_gives_zero_expectation():
    flipped = apply_circuit(init_zero(1), [ry(0, np.pi)])
    np.testing.assert_allclose(expectation_z_all(flipped), [-1.0], atol=1e-12)
    half = apply_circuit(init_zero(1), [rx(0, np.pi / 2)])
    np.testing.assert_allclose(expectation_z_all(half), [0.0], atol=1e-12)


def test_cnot_entangles_plus_state():
    state = apply_circuit(init_zero(2), [ry(0, np.pi / 2), cnot(0, 1)])
    np.testing.assert_allclose(state.probabilities, [0.5, 0.0, 0.0, 0.5], atol=1e-12)


def test_cnot_on_basis_states():
    state = apply_circuit(basis_state(3, 0b001), [cnot(0, 2)])
    assert abs(state.amplitudes[0b101]) == pytest.approx(1.0)
    untouched = apply_circuit(basis_state(3, 0b010), [cnot(0, 2)])
    assert abs(untouched.amplitudes[0b010]) == pytest.approx(1.0)


def test_rotations_are_unitary_and_preserve_norm(rng):
    for kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
        m = rotation_matrix(kind, 0.731)
        np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-12)
    state = apply_circuit(init_zero(4), random_circuit(4, 40, rng, list(GateKind)[:3] + [GateKind.CNOT]))
    assert state.norm() == pytest.approx(1.0, abs=1e-12)


def test_rz_is_a_phase_on_basis_states():
    state = apply_circuit(init_zero(1), [rz(0, 1.3)])
    assert states_equal(state, init_zero(1))


def test_bad_qubit_index_names_the_gate_position():
    with pytest.raises(QubitIndexError, match="gate 1"):
        apply_circuit(init_zero(2), [rx(0, 0.1), rx(2, 0.1)])
    with pytest.raises(QubitIndexError):
        apply_circuit(init_zero(2), [cnot(1, 1)])


def test_shot_means_are_reproducible_and_close(rng):
    state = apply_circuit(init_zero(2), [ry(0, np.pi / 3)])
    first = sample_shots(state, 20000, np.random.default_rng(5))
    second = sample_shots(state, 20000, np.random.default_rng(5))
    np.testing.assert_array_equal(first.means, second.means)
    assert sum(first.counts.values()) == 20000
    np.testing.assert_allclose(first.means, expectation_z_all(state), atol=0.03)


def test_norm_drift_after_a_thousand_gates_on_ten_qubits():
    circuit = random_circuit(10, 1000, task_rng(21), list(GateKind)[:3] + [GateKind.CNOT])
    state = apply_circuit(init_zero(10), circuit)
    assert abs(state.norm() - 1.0) <= 1e-10


@pytest.mark.parametrize("theta", [0.3, -1.2, np.pi, 2.9])
def test_ry_followed_by_its_inverse_is_identity(theta):
    start = apply_circuit(init_zero(3), random_circuit(3, 12, task_rng(8), list(GateKind)[:3] + [GateKind.CNOT]))
    state = apply_circuit(start.copy(), [ry(1, theta), ry(1, -theta)])
    np.testing.assert_allclose(state.amplitudes, start.amplitudes, atol=1e-12)


def test_expectation_follows_cosine_of_the_rotation_angle():
    for theta in np.linspace(-np.pi, np.pi, 25):
        for gate in (rx(0, theta), ry(0, theta)):
            z = expectation_z_all(apply_circuit(init_zero(1), [gate]))
            assert z[0] == pytest.approx(np.cos(theta), abs=1e-12)


def test_cnot_with_control_one_maps_ten_to_eleven():
    state = apply_circuit(basis_state(2, 0b10), [cnot(1, 0)])
    assert abs(state.amplitudes[0b11]) == pytest.approx(1.0)


def test_shot_means_are_unbiased_over_seeds():
    state = apply_circuit(init_zero(1), [ry(0, np.pi / 3)])
    means = np.array([sample_shots(state, 100, task_rng(31, s)).means[0] for s in range(400)])
    se = means.std(ddof=1) / np.sqrt(means.size)
    assert abs(means.mean() - 0.5) <= 4 * se


def test_basis_states_give_exact_shot_means():
    state = basis_state(2, 0b10)
    for seed in range(5):
        np.testing.assert_array_equal(sample_shots(state, 37, task_rng(seed)).means, [1.0, -1.0])


def test_zero_shots_is_an_argument_error():
    with pytest.raises(ArgumentError):
        sample_shots(init_zero(1), 0, task_rng(0))
