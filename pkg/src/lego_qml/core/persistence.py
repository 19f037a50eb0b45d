"""Checkpoint and result-file formats."""

import json
import logging
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvariantViolationError
from ..models import BlockReference, BoundReport, MetricsRow, ModelCheckpoint, PcaCheckpoint
from .blocks import FeatureBlock, IdentityBlock, PcaBlock, TtnBlock, embedding_load

logger = logging.getLogger(__name__)

TTN_MAGIC = b"LEGOTTN1"
TTN_VERSION = 1
METRICS_HEADER = "epoch,train_loss,train_acc,test_loss,test_acc,grad_norm,wallclock_s"


def provenance_comment(config_hash: str, seed: int) -> str:
    return f"config_hash={config_hash} seed={seed}"


# ---------------------------------------------------------------------------
# TTN binary checkpoint
# ---------------------------------------------------------------------------


def save_ttn(path: Path | str, block: TtnBlock) -> None:
    """LEGOTTN1 | u32 version | u32 N | (N+1) u32 ranks | N u32 m_k | N u32 n_k | f64 cores."""
    n = len(block.cores)
    header = struct.pack(
        f"<8sII{n + 1}I{n}I{n}I",
        TTN_MAGIC, TTN_VERSION, n, *block.ranks, *block.input_factors, *block.output_factors,
    )
    with open(path, "wb") as f:
        f.write(header)
        for core in block.cores:
            f.write(np.ascontiguousarray(core, dtype="<f8").tobytes())


def _unpack(fmt: str, data: bytes, offset: int, what: str) -> tuple:
    size = struct.calcsize(fmt)
    if offset + size > len(data):
        raise FormatError(f"truncated {what}", offset=len(data))
    return struct.unpack_from(fmt, data, offset)


def load_ttn(path: Path | str) -> TtnBlock:
    data = Path(path).read_bytes()
    magic, version, n = _unpack("<8sII", data, 0, "TTN header")
    if magic != TTN_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != TTN_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=8)
    if n < 1:
        raise FormatError(f"{path}: core count must be >= 1", offset=12)
    offset = 16
    ranks = _unpack(f"<{n + 1}I", data, offset, "rank list")
    offset += 4 * (n + 1)
    inputs = _unpack(f"<{n}I", data, offset, "input factors")
    offset += 4 * n
    outputs = _unpack(f"<{n}I", data, offset, "output factors")
    offset += 4 * n
    if ranks[0] != 1 or ranks[-1] != 1:
        raise FormatError(f"{path}: boundary ranks must be 1, got {ranks[0]} and {ranks[-1]}", offset=16)
    cores = []
    for k in range(n):
        shape = (ranks[k], inputs[k], outputs[k], ranks[k + 1])
        count = int(np.prod(shape))
        if offset + 8 * count > len(data):
            raise FormatError(f"{path}: core {k} truncated", offset=len(data))
        cores.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape))
        offset += 8 * count
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after last core", offset=offset)
    return TtnBlock(cores)


# ---------------------------------------------------------------------------
# PCA checkpoint
# ---------------------------------------------------------------------------


def pca_to_checkpoint(block: PcaBlock, seed: int | None = None, config_hash: str | None = None) -> PcaCheckpoint:
    return PcaCheckpoint(
        mean=block.mean.tolist(),
        components=block.components.tolist(),
        eigenvalues=block.eigenvalues.tolist(),
        checksum=block.checksum(),
        seed=seed,
        source_config_hash=config_hash,
    )


def pca_from_checkpoint(checkpoint: PcaCheckpoint) -> PcaBlock:
    block = PcaBlock(
        np.array(checkpoint.mean), np.array(checkpoint.components), np.array(checkpoint.eigenvalues)
    )
    if block.checksum() != checkpoint.checksum:
        raise InvariantViolationError("PCA checkpoint checksum does not match its content")
    return block


def save_pca(path: Path | str, block: PcaBlock, seed: int | None = None, config_hash: str | None = None) -> None:
    pca_to_checkpoint(block, seed, config_hash).to_json_file(path)


def load_pca(path: Path | str) -> PcaBlock:
    return pca_from_checkpoint(PcaCheckpoint.from_json_file(path))


# ---------------------------------------------------------------------------
# Model checkpoint
# ---------------------------------------------------------------------------


def block_reference(block: FeatureBlock, path: Path | str | None = None) -> BlockReference:
    """Reference to a frozen block; PCA data is stored inline, TTN/embedding by path."""
    return BlockReference(
        kind=block.kind,
        checksum=block.checksum(),
        path=None if path is None else str(path),
        pca=pca_to_checkpoint(block) if isinstance(block, PcaBlock) else None,
        width=block.width if isinstance(block, IdentityBlock) else None,
    )


def resolve_block(reference: BlockReference, base_dir: Path | None = None) -> FeatureBlock:
    """Rebuild the referenced block and verify its checksum."""
    def locate(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() or base_dir is None else base_dir / path

    block: FeatureBlock
    if reference.kind == "pca":
        if reference.pca is None:
            raise FormatError("PCA block reference carries no PCA data")
        block = PcaBlock(
            np.array(reference.pca.mean), np.array(reference.pca.components), np.array(reference.pca.eigenvalues)
        )
    elif reference.kind == "ttn":
        block = load_ttn(locate(reference.path))
    elif reference.kind == "embedding":
        block = embedding_load(locate(reference.path))
    else:
        block = IdentityBlock(reference.width)
    actual = block.checksum()
    if actual != reference.checksum:
        raise InvariantViolationError(
            f"{reference.kind} block checksum mismatch: checkpoint says {reference.checksum[:12]}, "
            f"content gives {actual[:12]}"
        )
    return block.freeze()


def save_model(path: Path | str, checkpoint: ModelCheckpoint) -> None:
    checkpoint.to_json_file(path)


def load_model(path: Path | str) -> tuple[ModelCheckpoint, FeatureBlock]:
    """Load a model checkpoint and its verified frozen block."""
    path = Path(path)
    checkpoint = ModelCheckpoint.from_json_file(path)
    return checkpoint, resolve_block(checkpoint.block, path.parent)


# ---------------------------------------------------------------------------
# Metrics CSV and reports
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def write_metrics_csv(path: Path | str, rows: list[MetricsRow], config_hash: str, seed: int,
                      include_wallclock: bool = False) -> None:
    with open(path, "w") as f:
        f.write(f"# {provenance_comment(config_hash, seed)}\n")
        f.write(METRICS_HEADER + "\n")
        for row in rows:
            wall = _fmt(row.wallclock_seconds) if include_wallclock else ""
            f.write(",".join([
                str(row.epoch), _fmt(row.train_loss), _fmt(row.train_accuracy), _fmt(row.test_loss),
                _fmt(row.test_accuracy), _fmt(row.mean_grad_norm), wall,
            ]) + "\n")


def read_metrics_csv(path: Path | str) -> list[MetricsRow]:
    with open(path, "r") as f:
        lines = [line.rstrip("\n") for line in f if not line.startswith("#")]
    if not lines or lines[0] != METRICS_HEADER:
        raise FormatError(f"{path}: expected header {METRICS_HEADER!r}")
    rows = []
    for line in lines[1:]:
        epoch, tl, ta, vl, va, g, w = line.split(",")
        rows.append(MetricsRow(
            epoch=int(epoch), train_loss=float(tl), train_accuracy=float(ta), test_loss=float(vl),
            test_accuracy=float(va), mean_grad_norm=float(g), wallclock_seconds=float(w) if w else 0.0,
        ))
    return rows


def write_table_csv(path: Path | str, columns: list[str], rows: list[list], comment: str | None = None) -> None:
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def save_report(path: Path | str, report: BoundReport) -> None:
    report.to_json_file(path)


def save_json(path: Path | str, data: dict) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
