"""Frozen classical feature blocks and the classical FC baseline head.

Every block maps raw inputs of width D_in to features of width U and exposes a
content checksum. Freezing marks every parameter array read-only; any later
write through the block API raises FrozenBlockError.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    ArgumentError,
    ConfigurationError,
    DataError,
    FormatError,
    FrozenBlockError,
    LookupFailure,
    ShapeError,
    SizeGuardError,
)
from ..models import TtnBlockSpec
from ..utils import array_checksum, task_rng
from .losses import accuracy, cross_entropy, cross_entropy_grad, softmax_probs
from .optim import Adam

logger = logging.getLogger(__name__)

DENSE_LIMIT = 1 << 20
EMBEDDING_MAGIC = b"LEGOEMB1"
EMBEDDING_VERSION = 1
_EMBEDDING_HEADER = struct.Struct("<8sIQI")


class FeatureBlock:
    """Base class for frozen feature blocks."""

    kind: str = ""

    def __init__(self) -> None:
        self.frozen = False

    @property
    def width(self) -> int:
        raise NotImplementedError

    def parameters(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def checksum(self) -> str:
        return array_checksum(*self.parameters())

    def freeze(self) -> "FeatureBlock":
        for arr in self.parameters():
            arr.setflags(write=False)
        self.frozen = True
        return self

    def ensure_trainable(self) -> None:
        if self.frozen:
            raise FrozenBlockError(f"{self.kind} block is frozen; its parameters cannot be updated")


class IdentityBlock(FeatureBlock):
    kind = "identity"

    def __init__(self, width: int):
        super().__init__()
        self._width = width

    @property
    def width(self) -> int:
        return self._width

    def parameters(self) -> list[np.ndarray]:
        return [np.array([self._width], dtype=np.int64)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self._width:
            raise ShapeError(f"identity block expects {self._width} features, got {x.shape[-1]}")
        return x.copy()


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


class PcaBlock(FeatureBlock):
    """Projection onto the top-U principal directions of the fitting data."""

    kind = "pca"

    def __init__(self, mean: np.ndarray, components: np.ndarray, eigenvalues: np.ndarray):
        super().__init__()
        self.mean = np.asarray(mean, dtype=np.float64)
        self.components = np.asarray(components, dtype=np.float64)
        self.eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        if self.components.shape != (self.eigenvalues.shape[0], self.mean.shape[0]):
            raise ShapeError(
                f"components shape {self.components.shape} does not match "
                f"{self.eigenvalues.shape[0]} eigenvalues and {self.mean.shape[0]} inputs"
            )

    @property
    def width(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [self.mean, self.components, self.eigenvalues]

    def forward(self, x: np.ndarray) -> np.ndarray:
        return pca_forward(self, x)


def _orient(components: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    pivots = components[np.arange(components.shape[0]), np.argmax(np.abs(components), axis=1)]
    return components * np.where(pivots < 0, -1.0, 1.0)[:, None]


def fit_pca(data: np.ndarray, components: int) -> PcaBlock:
    """Top principal directions from the SVD of the centered data."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError(f"expected an n x D matrix, got shape {data.shape}")
    n, d = data.shape
    if n < 2:
        raise DataError(f"need at least 2 rows to fit PCA, got {n}")
    if not 1 <= components <= min(n, d):
        raise ArgumentError(f"components must lie in [1, min(n, D_in) = {min(n, d)}], got {components}")
    mean = data.mean(axis=0)
    _, s, vt = np.linalg.svd(data - mean, full_matrices=False)
    eigenvalues = (s[:components] ** 2) / n
    logger.debug(f"PCA kept {components}/{d} directions, explained variance "
                 f"{eigenvalues.sum() / max((s ** 2).sum() / n, 1e-300):.3f}")
    return PcaBlock(mean, _orient(vt[:components]), eigenvalues)


def pca_forward(block: PcaBlock, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != block.input_dim:
        raise ShapeError(f"PCA block expects {block.input_dim} inputs, got {x.shape[-1]}")
    return (x - block.mean) @ block.components.T


# ---------------------------------------------------------------------------
# Tensor-train matrix
# ---------------------------------------------------------------------------


class TtnBlock(FeatureBlock):
    """Tensor-train matrix: core k has shape (r_{k-1}, m_k, n_k, r_k), r_0 = r_N = 1.

    Input and output indices are row-major over the factor grids with factor 1
    most significant.
    """

    kind = "ttn"

    def __init__(self, cores: list[np.ndarray], metadata: dict | None = None):
        super().__init__()
        self.cores = [np.asarray(c, dtype=np.float64) for c in cores]
        self.metadata = dict(metadata or {})
        _check_cores(self.cores)

    @property
    def input_factors(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def output_factors(self) -> list[int]:
        return [c.shape[2] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [self.cores[0].shape[0]] + [c.shape[3] for c in self.cores]

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_factors))

    @property
    def width(self) -> int:
        return int(np.prod(self.output_factors))

    def parameters(self) -> list[np.ndarray]:
        return list(self.cores)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return ttn_forward(self, x)


def _check_cores(cores: list[np.ndarray]) -> None:
    if not cores:
        raise ConfigurationError("a TTN block needs at least one core", field="ranks")
    for k, core in enumerate(cores):
        if core.ndim != 4:
            raise ConfigurationError(f"core {k} must be order 4, got shape {core.shape}", field="ranks")
        if not np.all(np.isfinite(core)):
            raise ConfigurationError(f"core {k} has non-finite entries", field="ranks")
        left = 1 if k == 0 else cores[k - 1].shape[3]
        if core.shape[0] != left:
            raise ConfigurationError(
                f"core {k} left rank {core.shape[0]} does not match previous right rank {left}", field="ranks"
            )
    if cores[-1].shape[3] != 1:
        raise ConfigurationError(f"last core right rank must be 1, got {cores[-1].shape[3]}", field="ranks")


def random_ttn(spec: TtnBlockSpec, rng: np.random.Generator) -> TtnBlock:
    """Gaussian cores scaled so outputs keep roughly the input's per-entry magnitude."""
    ranks = [1, *spec.ranks, 1]
    cores = []
    for k, (m, n) in enumerate(zip(spec.input_factors, spec.output_factors)):
        scale = 1.0 / np.sqrt(m * ranks[k])
        cores.append(rng.normal(0.0, scale, size=(ranks[k], m, n, ranks[k + 1])))
    return TtnBlock(cores)


def identity_ttn(factors: list[int]) -> TtnBlock:
    """Rank-1 cores each equal to the m_k x m_k identity."""
    return TtnBlock([np.eye(m)[None, :, :, None] for m in factors])


def _ttn_sweep(block: TtnBlock, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Outputs (B, U) and the left environments seen by each core."""
    batch = x.shape[0]
    z = x.reshape(batch, 1, -1, 1)
    lefts = []
    for core in block.cores:
        lefts.append(z)
        _, o, rest, a = z.shape
        m, n, b = core.shape[1], core.shape[2], core.shape[3]
        z = np.einsum("bomRa,amnc->bonRc", z.reshape(batch, o, m, rest // m, a), core)
        z = z.reshape(batch, o * n, rest // m, b)
    return z.reshape(batch, -1), lefts


def ttn_forward(block: TtnBlock, x: np.ndarray) -> np.ndarray:
    """Contract x (D_in,) or (B, D_in) through the cores left to right."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != block.input_dim:
        raise ConfigurationError(
            f"input width {x.shape[-1]} does not match the product of input factors "
            f"{block.input_factors} = {block.input_dim}",
            field="inputFactors",
        )
    y, _ = _ttn_sweep(block, np.atleast_2d(x))
    return y[0] if x.ndim == 1 else y


def ttn_to_dense(block: TtnBlock) -> np.ndarray:
    """(U, D_in) matrix of the full contraction; guarded to D_in * U <= 2^20."""
    if block.input_dim * block.width > DENSE_LIMIT:
        raise SizeGuardError(
            f"dense TTN of {block.width} x {block.input_dim} exceeds the {DENSE_LIMIT}-entry guard"
        )
    t = np.ones((1, 1, 1))
    for core in block.cores:
        rows, cols, _ = t.shape
        m, n, b = core.shape[1], core.shape[2], core.shape[3]
        t = np.einsum("MNa,amnb->MmNnb", t, core).reshape(rows * m, cols * n, b)
    return t[:, :, 0].T


def _right_environments(block: TtnBlock) -> list[np.ndarray]:
    """right[k] has shape (r_k, M_right, N_right) for the cores after k."""
    right = [np.ones((1, 1, 1))]
    for core in reversed(block.cores[1:]):
        env = right[0]
        a, m, n, _ = core.shape
        right.insert(0, np.einsum("amnb,bMN->amMnN", core, env).reshape(a, m * env.shape[1], n * env.shape[2]))
    return right


def ttn_core_grads(block: TtnBlock, x: np.ndarray, grad_out: np.ndarray) -> list[np.ndarray]:
    """Gradients of sum(grad_out * ttn_forward(x)) with respect to every core."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    grad_out = np.atleast_2d(grad_out)
    batch = x.shape[0]
    _, lefts = _ttn_sweep(block, x)
    rights = _right_environments(block)
    grads = []
    for core, left, right in zip(block.cores, lefts, rights):
        a, m, n, b = core.shape
        _, n_left, rest, _ = left.shape
        m_right, n_right = right.shape[1], right.shape[2]
        env = left.reshape(batch, n_left, m, m_right, a)
        g = grad_out.reshape(batch, n_left, n, n_right)
        grads.append(np.einsum("zlmra,zlnq,brq->amnb", env, g, right))
    return grads


def pretrain_ttn(block: TtnBlock, features: np.ndarray, labels: np.ndarray, num_classes: int,
                 epochs: int, lr: float, seed: int, batch_size: int = 32) -> TtnBlock:
    """Fit the cores on a source task through a throwaway linear probe, then freeze.

    The returned block is a new, frozen object; `block` is left untouched. Probe
    training accuracy is recorded in `metadata["probe_accuracy"]`.
    """
    block.ensure_trainable()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0] or features.shape[0] < 2:
        raise DataError("source task needs at least 2 labelled rows with matching label count")
    rng = task_rng(seed)
    params = {f"core{k}": c.copy() for k, c in enumerate(block.cores)}
    params["probe_w"] = rng.normal(0.0, 0.1, size=(num_classes, block.width))
    params["probe_b"] = np.zeros(num_classes)
    optimizer = Adam(lr)
    n = features.shape[0]
    trained = TtnBlock([params[f"core{k}"] for k in range(len(block.cores))])

    def probe(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = ttn_forward(trained, x)
        return y, softmax_probs(y @ params["probe_w"].T + params["probe_b"], num_classes)

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            y, probs = probe(features[idx])
            delta = cross_entropy_grad(probs, labels[idx]) / len(idx)
            core_grads = ttn_core_grads(trained, features[idx], delta @ params["probe_w"])
            grads = {f"core{k}": g for k, g in enumerate(core_grads)}
            grads["probe_w"] = delta.T @ y
            grads["probe_b"] = delta.sum(axis=0)
            optimizer.step(params, grads)
        if (epoch + 1) % 10 == 0 or epoch == epochs - 1:
            _, probs = probe(features)
            logger.debug(f"pretrain epoch {epoch + 1}: loss {cross_entropy(probs, labels):.4f}")

    _, probs = probe(features)
    probe_accuracy = accuracy(probs, labels)
    logger.info(f"TTN pretraining finished after {epochs} epochs, probe accuracy {probe_accuracy:.3f}")
    metadata = dict(block.metadata, probe_accuracy=probe_accuracy, pretrain_seed=seed, pretrain_epochs=epochs)
    return TtnBlock([c.copy() for c in trained.cores], metadata).freeze()


# ---------------------------------------------------------------------------
# Embedding table
# ---------------------------------------------------------------------------


class EmbeddingBlock(FeatureBlock):
    """Precomputed feature vectors looked up by 64-bit sample id."""

    kind = "embedding"

    def __init__(self, ids: np.ndarray, vectors: np.ndarray, source_tag: str = ""):
        super().__init__()
        ids = np.asarray(ids, dtype=np.uint64)
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != ids.shape[0]:
            raise ShapeError(f"{ids.shape[0]} ids but vectors of shape {vectors.shape}")
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.vectors = vectors[order]
        self.source_tag = source_tag
        self._index = {int(i): row for row, i in enumerate(self.ids)}

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.ids, self.vectors]

    def lookup(self, sample_id: int) -> np.ndarray:
        try:
            return self.vectors[self._index[int(sample_id)]]
        except KeyError:
            raise LookupFailure(f"sample id {int(sample_id)} not found in embedding table {self.source_tag!r}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Rows of ids, shape (n,) or (n, 1), to (n, U) vectors."""
        ids = np.asarray(x).reshape(-1)
        return np.stack([self.lookup(i) for i in ids]) if ids.size else np.empty((0, self.width))


def embedding_load(path: Path | str) -> EmbeddingBlock:
    """Read a LEGOEMB1 file: header, then n records of (u64 id, U little-endian f32)."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _EMBEDDING_HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(data))
    magic, version, n, width = _EMBEDDING_HEADER.unpack_from(data, 0)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != EMBEDDING_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=8)
    if width < 1:
        raise FormatError(f"{path}: embedding width must be >= 1", offset=20)
    record = np.dtype([("id", "<u8"), ("vec", "<f4", (width,))])
    body = len(data) - _EMBEDDING_HEADER.size
    if body < n * record.itemsize:
        complete = body // record.itemsize
        raise FormatError(
            f"{path}: expected {n} records, file ends inside record {complete}",
            offset=_EMBEDDING_HEADER.size + complete * record.itemsize,
        )
    if body > n * record.itemsize:
        raise FormatError(f"{path}: trailing bytes after {n} records",
                          offset=_EMBEDDING_HEADER.size + n * record.itemsize)
    records = np.frombuffer(data, dtype=record, count=n, offset=_EMBEDDING_HEADER.size)
    ids = records["id"]
    unique, first = np.unique(ids, return_index=True)
    if unique.shape[0] != n:
        dup = np.setdiff1d(np.arange(n), first)[0]
        raise FormatError(f"{path}: duplicate id {int(ids[dup])}",
                          offset=_EMBEDDING_HEADER.size + int(dup) * record.itemsize)
    vectors = records["vec"].astype(np.float64)
    if not np.all(np.isfinite(vectors)):
        bad = int(np.argwhere(~np.isfinite(vectors))[0, 0])
        raise FormatError(f"{path}: non-finite value in record {bad}",
                          offset=_EMBEDDING_HEADER.size + bad * record.itemsize)
    return EmbeddingBlock(ids.copy(), vectors, source_tag=path.name)


def embedding_save(path: Path | str, ids: np.ndarray, vectors: np.ndarray) -> None:
    ids = np.asarray(ids, dtype=np.uint64)
    vectors = np.asarray(vectors)
    record = np.dtype([("id", "<u8"), ("vec", "<f4", (vectors.shape[1],))])
    records = np.empty(ids.shape[0], dtype=record)
    records["id"] = ids
    records["vec"] = vectors
    with open(path, "wb") as f:
        f.write(_EMBEDDING_HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION, ids.shape[0], vectors.shape[1]))
        f.write(records.tobytes())


# ---------------------------------------------------------------------------
# Classical FC head
# ---------------------------------------------------------------------------


@dataclass
class FcHead:
    """Trainable linear softmax head: logits = weight @ z + bias."""
    weight: np.ndarray
    bias: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.bias is None:
            self.bias = np.zeros(self.weight.shape[0])
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match {self.weight.shape[0]} classes")

    @classmethod
    def zeros(cls, num_classes: int, width: int) -> "FcHead":
        return cls(np.zeros((num_classes, width)), np.zeros(num_classes))

    @classmethod
    def random(cls, num_classes: int, width: int, rng: np.random.Generator, scale: float = 0.1) -> "FcHead":
        return cls(rng.normal(0.0, scale, size=(num_classes, width)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def width(self) -> int:
        return self.weight.shape[1]

    @property
    def param_count(self) -> int:
        return self.weight.size + self.bias.size

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}


def fc_forward(head: FcHead, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != head.width:
        raise ShapeError(f"FC head expects {head.width} features, got {z.shape[-1]}")
    return z @ head.weight.T + head.bias


def fc_grad(head: FcHead, z: np.ndarray, label: int | np.ndarray) -> dict[str, np.ndarray]:
    """Exact softmax-cross-entropy gradients, averaged over rows when z is a batch."""
    z2 = np.atleast_2d(np.asarray(z, dtype=np.float64))
    probs = softmax_probs(fc_forward(head, z2), head.num_classes)
    delta = cross_entropy_grad(probs, np.atleast_1d(label)) / z2.shape[0]
    return {"weight": delta.T @ z2, "bias": delta.sum(axis=0)}
