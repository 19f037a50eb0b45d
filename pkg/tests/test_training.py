import numpy as np
import pytest

from lego_qml.errors import ArgumentError, DivergenceError, ShapeError
from lego_qml.models import AnsatzSpec, EvalMode, TrainConfig
from lego_qml.core import training
from lego_qml.core.blocks import FcHead, IdentityBlock, fit_pca
from lego_qml.core.datasets import Dataset
from lego_qml.core.encoding import fit_normalizer
from lego_qml.core.optim import SGD, Adam, build_optimizer
from lego_qml.core.training import Assembly, batch_loss_grad, evaluate, theorem3_lr, train
from lego_qml.core.vqc import init_theta
from lego_qml.utils import task_rng


def _blobs(n: int, seed: int) -> Dataset:
    rng = task_rng(seed)
    labels = np.arange(n) % 2
    centers = np.where(labels[:, None] == 1, 1.5, -1.5) * np.array([1.0, 0.3])
    return Dataset(centers + rng.normal(0.0, 0.5, size=(n, 2)), labels)


def _vqc_assembly(train_set: Dataset, depth: int = 1) -> Assembly:
    spec = AnsatzSpec(num_qubits=2, depth=depth, measure_qubits=2)
    return Assembly(IdentityBlock(2), fit_normalizer(train_set.features), 2, ansatz=spec,
                    theta=init_theta(spec, task_rng(0)))


def _fc_assembly(train_set: Dataset) -> Assembly:
    return Assembly(IdentityBlock(2), fit_normalizer(train_set.features), 2, fc=FcHead.zeros(2, 2))


def test_theorem3_learning_rate():
    assert theorem3_lr(1.0, 1.0, 1.0, 100) == pytest.approx(0.0070711, abs=1e-7)
    with pytest.raises(ArgumentError):
        theorem3_lr(1.0, 0.0, 1.0, 100)
    with pytest.raises(ArgumentError):
        theorem3_lr(1.0, 1.0, 1.0, 0)


def test_theorem3_schedule_uses_total_optimizer_steps():
    config = TrainConfig.model_validate(
        {"epochs": 5, "batchSize": 10, "lr": {"kind": "theorem3", "R": 2.0, "L": 1.0, "betaSmooth": 0.5}}
    )
    steps = 5 * training.steps_per_epoch(25, 10)
    assert steps == 15
    assert training.resolve_lr(config, steps) == pytest.approx(2.0 / np.sqrt(2.0) / 15)


def test_optimizers_update_in_place():
    params = {"w": np.array([1.0, -1.0])}
    SGD(0.5).step(params, {"w": np.array([2.0, 2.0])})
    np.testing.assert_allclose(params["w"], [0.0, -2.0])
    adam = Adam(0.1)
    adam.step(params, {"w": np.array([1.0, -1.0])})
    np.testing.assert_allclose(params["w"], [-0.1, -1.9], atol=1e-6)
    with pytest.raises(ArgumentError):
        SGD(-1.0)
    assert isinstance(build_optimizer(TrainConfig(optimizer="sgd"), 0.1), SGD)


def test_assembly_rejects_mismatched_heads():
    train_set = _blobs(10, 1)
    normalizer = fit_normalizer(train_set.features)
    with pytest.raises(ArgumentError):
        Assembly(IdentityBlock(2), normalizer, 2)
    with pytest.raises(ShapeError):
        Assembly(IdentityBlock(2), normalizer, 2, ansatz=AnsatzSpec(num_qubits=3, measure_qubits=2),
                 theta=np.zeros(9))
    with pytest.raises(ShapeError):
        Assembly(IdentityBlock(2), normalizer, 3, ansatz=AnsatzSpec(num_qubits=2), theta=np.zeros(6))


def test_batch_gradient_matches_finite_differences():
    train_set = _blobs(12, 2)
    assembly = _vqc_assembly(train_set, depth=2)
    encoded = assembly.encode(train_set)
    mode = EvalMode.analytic()
    _, grad, _ = batch_loss_grad(assembly, encoded, train_set.labels, mode)
    step = 1e-5
    for j in (0, 4, 11):
        plus, minus = assembly.theta.copy(), assembly.theta.copy()
        plus[j] += step
        minus[j] -= step
        lp, _, _ = batch_loss_grad(assembly, encoded, train_set.labels, mode, theta=plus)
        lm, _, _ = batch_loss_grad(assembly, encoded, train_set.labels, mode, theta=minus)
        assert grad[j] == pytest.approx((lp - lm) / (2 * step), abs=1e-6)


def test_vqc_training_reduces_loss_and_keeps_block_frozen():
    train_set, test_set = _blobs(40, 3), _blobs(20, 4)
    block = fit_pca(train_set.features, 2).freeze()
    spec = AnsatzSpec(num_qubits=2, depth=1, measure_qubits=2)
    assembly = Assembly(block, fit_normalizer(block.forward(train_set.features)), 2, ansatz=spec,
                        theta=init_theta(spec, task_rng(0)))
    checksum = block.checksum()
    config = TrainConfig(epochs=10, batch_size=10, lr=0.1)
    result = train(assembly, train_set, test_set, config, seed=5)
    assert len(result.history) == 11
    assert result.history[0].mean_grad_norm == 0.0
    assert result.history[-1].train_loss < result.history[0].train_loss
    assert result.block_checksum == checksum == block.checksum()
    assert result.steps == 40


def test_fc_training_separates_blobs():
    train_set, test_set = _blobs(40, 5), _blobs(20, 6)
    assembly = _fc_assembly(train_set)
    result = train(assembly, train_set, test_set, TrainConfig(epochs=20, batch_size=8, lr=0.05), seed=1)
    assert result.history[-1].test_accuracy >= 0.9
    assert result.history[0].train_loss == pytest.approx(np.log(2))


def test_zero_learning_rate_leaves_head_unchanged():
    train_set = _blobs(20, 7)
    assembly = _vqc_assembly(train_set)
    before = assembly.theta.copy()
    result = train(assembly, train_set, _blobs(10, 8), TrainConfig(epochs=2, batch_size=5, lr=0.0), seed=2)
    np.testing.assert_array_equal(assembly.theta, before)
    assert result.history[0].train_loss == result.history[-1].train_loss


def test_training_is_reproducible_for_a_seed():
    train_set, test_set = _blobs(24, 9), _blobs(8, 10)
    config = TrainConfig.model_validate({"epochs": 2, "batchSize": 6, "lr": 0.05,
                                         "evalMode": {"kind": "shots", "shots": 128}})
    first, second = _vqc_assembly(train_set), _vqc_assembly(train_set)
    a = train(first, train_set, test_set, config, seed=3, workers=1)
    b = train(second, train_set, test_set, config, seed=3, workers=3)
    np.testing.assert_array_equal(first.theta, second.theta)
    assert [r.train_loss for r in a.history] == [r.train_loss for r in b.history]


def test_nan_loss_raises_divergence(monkeypatch):
    train_set = _blobs(10, 11)
    assembly = _vqc_assembly(train_set)

    def diverging(*args, **kwargs):
        return float("nan"), np.zeros(assembly.ansatz.param_count), None

    monkeypatch.setattr(training, "batch_loss_grad", diverging)
    with pytest.raises(DivergenceError) as excinfo:
        train(assembly, train_set, _blobs(4, 12), TrainConfig(epochs=3, batch_size=5, lr=0.1))
    assert excinfo.value.epoch == 1


def test_evaluate_does_not_touch_parameters():
    train_set = _blobs(10, 13)
    assembly = _vqc_assembly(train_set)
    before = assembly.theta.copy()
    loss, acc = evaluate(assembly, train_set, EvalMode.analytic())
    assert loss > 0 and 0.0 <= acc <= 1.0
    np.testing.assert_array_equal(assembly.theta, before)
