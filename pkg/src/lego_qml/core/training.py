"""Downstream training of the trainable head on top of a frozen feature block."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, DataError, DivergenceError, InvariantViolationError, ShapeError
from ..models import AnsatzSpec, EvalMode, MetricsRow, Theorem3Schedule, TrainConfig
from ..utils import array_checksum, task_rng
from .blocks import FcHead, FeatureBlock, fc_forward, fc_grad
from .datasets import Dataset
from .encoding import NormalizerSpec, phi, product_amplitudes
from .executor import CircuitExecutor
from .losses import accuracy, cross_entropy, cross_entropy_grad, softmax_probs
from .optim import build_optimizer
from .vqc import jacobians

logger = logging.getLogger(__name__)

# Stream tags for task_rng so shuffling, gradients and evaluation never share a stream.
SHUFFLE_STREAM = 1
GRADIENT_STREAM = 2
EVAL_STREAM = 3


def theorem3_lr(r_bound: float, l_bound: float, beta_smooth: float, steps: int) -> float:
    """Constant step (1/T) R / sqrt(L^2 + beta^2 R^2)."""
    if min(r_bound, l_bound, beta_smooth) <= 0 or steps <= 0:
        raise ArgumentError(
            f"R, L, beta and T must be positive, got R={r_bound}, L={l_bound}, beta={beta_smooth}, T={steps}"
        )
    return (1.0 / steps) * r_bound / np.sqrt(l_bound ** 2 + beta_smooth ** 2 * r_bound ** 2)


def projection_matrix(num_classes: int, width: int, seed: int) -> np.ndarray:
    """Fixed, non-trainable (C, U) random readout projection."""
    return task_rng(seed).normal(0.0, 1.0 / np.sqrt(width), size=(num_classes, width))


@dataclass
class Assembly:
    """Frozen block + normalizer + trainable head (VQC angles or FC weights)."""
    block: FeatureBlock
    normalizer: NormalizerSpec
    num_classes: int
    ansatz: AnsatzSpec | None = None
    theta: np.ndarray | None = None
    fc: FcHead | None = None
    readout: str = "first"
    projection_seed: int = 0
    _executor: CircuitExecutor | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if (self.ansatz is None) == (self.fc is None):
            raise ArgumentError("an assembly needs exactly one head: a VQC ansatz or an FC head")
        if self.ansatz is not None:
            if self.theta is None or np.shape(self.theta) != (self.ansatz.param_count,):
                raise ShapeError(f"theta must have length {self.ansatz.param_count}")
            self.theta = np.asarray(self.theta, dtype=np.float64)
            if self.block.width != self.ansatz.num_qubits:
                raise ShapeError(
                    f"feature block width {self.block.width} does not match {self.ansatz.num_qubits} qubits"
                )
            if self.readout == "first" and self.num_classes > self.ansatz.num_qubits:
                raise ShapeError(f"{self.num_classes} classes need readout 'projection' on "
                                 f"{self.ansatz.num_qubits} qubits")

    @property
    def is_quantum(self) -> bool:
        return self.ansatz is not None

    @property
    def executor(self) -> CircuitExecutor:
        if self._executor is None:
            self._executor = CircuitExecutor(self.ansatz)
        return self._executor

    @property
    def head_param_count(self) -> int:
        return self.ansatz.param_count if self.is_quantum else self.fc.param_count

    def readout_matrix(self) -> np.ndarray:
        """(C, U) map from expectations to class scores."""
        width = self.ansatz.num_qubits
        if self.readout == "projection":
            return projection_matrix(self.num_classes, width, self.projection_seed)
        return np.eye(self.num_classes, width)

    def frozen_checksum(self) -> str:
        """Checksum over everything training must not modify."""
        arrays = [np.frombuffer(self.block.checksum().encode(), dtype=np.uint8), self.normalizer.mean,
                  self.normalizer.std]
        if self.is_quantum:
            arrays.append(self.readout_matrix())
        return array_checksum(*arrays)

    def encode(self, dataset: Dataset) -> np.ndarray:
        """phi of the frozen block features, (n, U)."""
        raw = self.block.forward(dataset.ids if self.block.kind == "embedding" else dataset.features)
        return phi(self.normalizer, raw)

    def scores(self, encoded: np.ndarray, mode: EvalMode, rng: np.random.Generator | None = None,
               theta: np.ndarray | None = None) -> np.ndarray:
        """Class scores (n, C) fed to the softmax."""
        if not self.is_quantum:
            return fc_forward(self.fc, encoded)
        theta = self.theta if theta is None else theta
        states = product_amplitudes(encoded)
        z = self.executor.expectations(np.tile(theta, (states.shape[0], 1)), states, mode, rng)
        return z @ self.readout_matrix().T


def batch_loss_grad(assembly: Assembly, encoded: np.ndarray, labels: np.ndarray, mode: EvalMode,
                    theta: np.ndarray | None = None, stream: tuple[int, ...] = (0,),
                    workers: int = 1) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy, its gradient in theta, and the predicted probabilities."""
    theta = assembly.theta if theta is None else theta
    z, jac = jacobians(assembly.executor, theta, product_amplitudes(encoded), mode, stream, workers)
    readout = assembly.readout_matrix()
    probs = softmax_probs(z @ readout.T, assembly.num_classes)
    delta = cross_entropy_grad(probs, labels) @ readout
    grad = np.einsum("ku,kup->p", delta, jac) / encoded.shape[0]
    return cross_entropy(probs, labels), grad, probs


def evaluate(assembly: Assembly, dataset: Dataset, mode: EvalMode,
             rng: np.random.Generator | None = None) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) without touching any parameter."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    probs = softmax_probs(assembly.scores(assembly.encode(dataset), mode, rng), assembly.num_classes)
    return cross_entropy(probs, dataset.labels), accuracy(probs, dataset.labels)


@dataclass
class TrainResult:
    history: list[MetricsRow]
    steps: int
    lr: float
    block_checksum: str
    wallclock_seconds: float


def resolve_lr(config: TrainConfig, steps: int) -> float:
    if isinstance(config.lr, Theorem3Schedule):
        return theorem3_lr(config.lr.r_bound, config.lr.l_bound, config.lr.beta_smooth, steps)
    return float(config.lr)


def steps_per_epoch(n_train: int, batch_size: int) -> int:
    return -(-n_train // batch_size)


def train(assembly: Assembly, train_set: Dataset, test_set: Dataset, config: TrainConfig,
          mode: EvalMode | None = None, seed: int = 0, workers: int = 1) -> TrainResult:
    """Optimize the head parameters only; the assembly's theta / FC weights are updated in place.

    Row 0 of the history is the evaluation before the first update.
    """
    if len(train_set) == 0:
        raise DataError("training set is empty")
    mode = mode or config.eval_mode
    block_checksum = assembly.block.checksum()
    frozen_checksum = assembly.frozen_checksum()
    encoded_train = assembly.encode(train_set)
    per_epoch = steps_per_epoch(len(train_set), config.batch_size)
    lr = resolve_lr(config, config.epochs * per_epoch)
    optimizer = build_optimizer(config, lr)
    params = {"theta": assembly.theta} if assembly.is_quantum else assembly.fc.params()
    logger.info(f"training {'VQC' if assembly.is_quantum else 'FC'} head with {assembly.head_param_count} "
                f"parameters, {config.optimizer} lr={lr:.6g}, {config.epochs} epochs x {per_epoch} steps")

    def record(epoch: int, grad_norm: float, elapsed: float) -> MetricsRow:
        train_loss, train_acc = evaluate(assembly, train_set, mode, task_rng(seed, epoch, EVAL_STREAM, 0))
        test_loss, test_acc = (evaluate(assembly, test_set, mode, task_rng(seed, epoch, EVAL_STREAM, 1))
                               if len(test_set) else (0.0, 0.0))
        if not np.isfinite(train_loss):
            raise DivergenceError(epoch, grad_norm)
        return MetricsRow(
            epoch=epoch, train_loss=train_loss, train_accuracy=train_acc, test_loss=test_loss,
            test_accuracy=test_acc, mean_grad_norm=grad_norm, wallclock_seconds=elapsed,
        )

    start = time.perf_counter()
    history = [record(0, 0.0, 0.0)]
    for epoch in range(1, config.epochs + 1):
        order = task_rng(seed, epoch, SHUFFLE_STREAM).permutation(len(train_set))
        norms = []
        for step in range(per_epoch):
            idx = order[step * config.batch_size:(step + 1) * config.batch_size]
            labels = train_set.labels[idx]
            if assembly.is_quantum:
                loss, grad, _ = batch_loss_grad(
                    assembly, encoded_train[idx], labels, mode,
                    stream=(seed, epoch, GRADIENT_STREAM, step), workers=workers,
                )
                grads = {"theta": grad}
            else:
                probs = softmax_probs(fc_forward(assembly.fc, encoded_train[idx]), assembly.num_classes)
                loss = cross_entropy(probs, labels)
                grads = fc_grad(assembly.fc, encoded_train[idx], labels)
            norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
            if not np.isfinite(loss) or not np.isfinite(norm):
                raise DivergenceError(epoch, norm)
            norms.append(norm)
            optimizer.step(params, grads)
        row = record(epoch, float(np.mean(norms)), time.perf_counter() - start)
        history.append(row)
        logger.info(f"epoch {epoch}/{config.epochs}: train loss {row.train_loss:.4f} acc {row.train_accuracy:.3f}, "
                    f"test loss {row.test_loss:.4f} acc {row.test_accuracy:.3f}, grad norm {row.mean_grad_norm:.4g}")

    if assembly.block.checksum() != block_checksum or assembly.frozen_checksum() != frozen_checksum:
        raise InvariantViolationError("frozen feature block changed during training")
    return TrainResult(history, config.epochs * per_epoch, lr, block_checksum, time.perf_counter() - start)
