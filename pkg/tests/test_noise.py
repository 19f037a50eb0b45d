import numpy as np
import pytest

from lego_qml.errors import ArgumentError
from lego_qml.models import AnsatzSpec, EvalMode, NoiseModel
from lego_qml.core.executor import CircuitExecutor
from lego_qml.core.noise import (
    apply_readout_expectation,
    describe,
    inject_measurement_noise,
    is_noise_free,
    noisy_expectation,
    sample_gate_noise,
    sample_readout_means,
    trajectory_expectations,
)
from lego_qml.core.statevector import GateKind, apply_circuit, cnot, expectation_z_all, init_zero, rx, ry, sample_counts
from lego_qml.utils import task_rng


def test_noiseless_model_reproduces_statevector():
    circuit = [ry(0, 0.4), cnot(0, 1), rx(1, 1.1)]
    expected = expectation_z_all(apply_circuit(init_zero(2), circuit))
    z = noisy_expectation(circuit, init_zero(2), NoiseModel(), task_rng(0))
    np.testing.assert_allclose(z, expected, atol=1e-12)


def test_zero_probabilities_insert_nothing(rng):
    model = NoiseModel()
    assert all(not sample_gate_noise(model, rx(0, 0.1), rng) for _ in range(100))
    assert is_noise_free(model)
    assert is_noise_free(None)


@pytest.mark.parametrize("p", [0.05, 0.2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_depolarizing_contraction_matches_oracle(p, k):
    model = NoiseModel(p_depol_1q=p, n_trajectories=4000)
    circuit = [rx(0, 0.0)] * k
    values = trajectory_expectations(circuit, init_zero(1), model, task_rng(11, k))[:, 0]
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - (1 - p) ** k) <= 4 * se


def test_dephasing_leaves_z_basis_expectations_unchanged():
    model = NoiseModel(p_dephase_1q=0.3, n_trajectories=200)
    values = trajectory_expectations([rx(0, 0.0)] * 3, init_zero(1), model, task_rng(3))
    np.testing.assert_allclose(values, 1.0)


def test_trajectories_are_worker_count_independent():
    model = NoiseModel(p_depol_1q=0.1, p_pauli_2q=0.1, n_trajectories=300)
    circuit = [ry(0, 0.3), cnot(0, 1), ry(1, 0.7)]
    serial = trajectory_expectations(circuit, init_zero(2), model, task_rng(5), workers=1)
    threaded = trajectory_expectations(circuit, init_zero(2), model, task_rng(5), workers=4)
    np.testing.assert_array_equal(serial, threaded)


def test_readout_scaling_is_exact_in_expectation_mode():
    z = np.array([0.3, -0.8, 1.0])
    np.testing.assert_allclose(apply_readout_expectation(z, 0.1), 0.8 * z, atol=1e-12)
    with pytest.raises(ArgumentError):
        apply_readout_expectation(z, 0.7)


def test_executor_readout_matches_analytic_scaling(small_ansatz):
    executor = CircuitExecutor(small_ansatz)
    theta = task_rng(2).normal(size=(1, small_ansatz.param_count))
    state = init_zero(3).amplitudes[None, :]
    clean = executor.expectations(theta, state, EvalMode.analytic())
    noisy = executor.expectations(theta, state, EvalMode.analytic(NoiseModel(p_readout_flip=0.15)))
    np.testing.assert_allclose(noisy, 0.7 * clean, atol=1e-12)


def test_sampled_readout_flips_without_noise_equal_plain_means():
    probs = np.array([[0.1, 0.2, 0.3, 0.4]])
    counts = sample_counts(probs, 500, task_rng(9))
    means = sample_readout_means(counts, 2, 0.0, task_rng(9))
    bits_zero_q0 = counts[0, 0] + counts[0, 2]
    assert means[0, 0] == pytest.approx((2 * bits_zero_q0 - 500) / 500)


def test_measurement_noise_has_tau_squared_total_variance():
    z = np.zeros((20000, 4))
    noisy = inject_measurement_noise(z, 0.5, task_rng(4))
    assert np.mean(np.sum(noisy ** 2, axis=1)) == pytest.approx(0.25, rel=0.05)
    np.testing.assert_array_equal(inject_measurement_noise(z, 0.0, task_rng(4)), z)
    with pytest.raises(ArgumentError):
        inject_measurement_noise(z, -0.1, task_rng(4))


def test_batched_executor_depolarizing_contraction():
    p, rows = 0.2, 8000
    executor = CircuitExecutor(AnsatzSpec(num_qubits=1, depth=1, measure_qubits=1))
    model = NoiseModel(p_depol_1q=p, n_trajectories=rows)
    amps = executor.final_amplitudes(np.zeros((rows, 3)), np.tile(init_zero(1).amplitudes, (rows, 1)),
                                     model, task_rng(6))
    values = np.abs(amps[:, 0]) ** 2 - np.abs(amps[:, 1]) ** 2
    se = values.std(ddof=1) / np.sqrt(rows)
    assert abs(values.mean() - (1 - p) ** 3) <= 4 * se


def test_describe_lists_every_parameter():
    text = describe(NoiseModel(p_depol_1q=0.01, n_trajectories=8))
    assert "depol=0.01" in text and "trajectories=8" in text


def test_depolarizing_inserts_a_pauli_at_three_quarters_of_p():
    p, trials = 0.2, 20000
    model = NoiseModel(p_depol_1q=p)
    rng = task_rng(41)
    inserted = [sample_gate_noise(model, rx(0, 0.1), rng) for _ in range(trials)]
    hits = np.array([len(g) for g in inserted])
    assert set(hits) <= {0, 1}
    se = np.sqrt(0.75 * p * (1 - 0.75 * p) / trials)
    assert abs(hits.mean() - 0.75 * p) <= 4 * se
    kinds = [g[0].kind for g in inserted if g]
    for kind in (GateKind.PX, GateKind.PY, GateKind.PZ):
        assert kinds.count(kind) / trials == pytest.approx(p / 4, abs=4 * np.sqrt(p / 4 / trials))


def test_two_qubit_errors_draw_from_the_fifteen_non_identity_paulis():
    p, trials = 0.3, 20000
    model = NoiseModel(p_pauli_2q=p)
    rng = task_rng(42)
    inserted = [sample_gate_noise(model, cnot(0, 1), rng) for _ in range(trials)]
    hit = np.array([bool(g) for g in inserted])
    se = np.sqrt(p * (1 - p) / trials)
    assert abs(hit.mean() - p) <= 4 * se
    patterns = {tuple((g.kind, g.qubits) for g in gates) for gates in inserted if gates}
    assert len(patterns) == 15


def test_measurement_noise_is_zero_mean_per_component():
    z = np.tile([0.3, -0.6, 0.9, 0.0], (20000, 1))
    xi = inject_measurement_noise(z, 0.5, task_rng(43)) - z
    se = xi.std(axis=0, ddof=1) / np.sqrt(xi.shape[0])
    assert np.all(np.abs(xi.mean(axis=0)) <= 4 * se)


def test_executor_readout_rejects_flip_probabilities_above_one_half(small_ansatz):
    executor = CircuitExecutor(small_ansatz)
    theta = np.zeros((1, small_ansatz.param_count))
    state = init_zero(3).amplitudes[None, :]
    unchecked = NoiseModel.model_construct(p_readout_flip=0.7)
    with pytest.raises(ArgumentError):
        executor.expectations(theta, state, EvalMode.analytic(unchecked))
