"""Softmax readout and cross-entropy."""

import numpy as np

from ..errors import ArgumentError, ShapeError

PROB_FLOOR = 1e-12


def softmax_probs(z: np.ndarray, num_classes: int) -> np.ndarray:
    """Softmax over the first `num_classes` entries of z (last axis), max-subtracted."""
    z = np.asarray(z, dtype=np.float64)
    if num_classes > z.shape[-1]:
        raise ShapeError(f"num_classes {num_classes} exceeds score length {z.shape[-1]}")
    scores = z[..., :num_classes]
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind not in "iu" or np.any(labels < 0) or np.any(labels >= num_classes):
        raise ArgumentError(f"labels must be integers in [0, {num_classes})")
    return labels.astype(np.int64)


def cross_entropy(probs: np.ndarray, label: int | np.ndarray) -> float:
    """-log p_y with p_y clamped at 1e-12; batch mean when `probs` is (N, C)."""
    probs = np.asarray(probs, dtype=np.float64)
    batch = np.atleast_2d(probs)
    labels = _check_labels(np.atleast_1d(label), batch.shape[-1])
    if labels.shape[0] != batch.shape[0]:
        raise ShapeError(f"{batch.shape[0]} probability rows but {labels.shape[0]} labels")
    picked = batch[np.arange(batch.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(-log p_y)/d scores = p - onehot(y), per row."""
    probs = np.atleast_2d(probs)
    labels = _check_labels(np.atleast_1d(labels), probs.shape[-1])
    grad = probs.copy()
    grad[np.arange(grad.shape[0]), labels] -= 1.0
    return grad


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(np.atleast_2d(probs), axis=-1) == np.asarray(labels)))
