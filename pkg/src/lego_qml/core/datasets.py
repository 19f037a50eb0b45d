"""Synthetic datasets, dataset CSV ingestion and stratified splitting."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, DataError, FormatError
from ..utils import task_rng

logger = logging.getLogger(__name__)

DOT_SIZE = 50
BASES = "ACGT"
TFBS_LENGTH = 101

# Quantum-dot generator constants
SHALLOW_SLOPE = (0.2, 0.8)
STEEP_SLOPE = (2.0, 5.0)
LINE_SPACING = (0.12, 0.25)
LINE_WIDTH = (0.02, 0.035)
PIXEL_NOISE = 0.15
MAX_STREAKS = 3


@dataclass
class Dataset:
    """Labelled rows; `ids` index rows for embedding lookups."""
    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray = field(default=None)
    name: str = ""
    sequences: list[str] | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.ids is None:
            self.ids = np.arange(self.labels.shape[0], dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0] or self.ids.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"row count mismatch: {self.features.shape[0]} feature rows, "
                f"{self.labels.shape[0]} labels, {self.ids.shape[0]} ids"
            )

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            self.features[index],
            self.labels[index],
            self.ids[index],
            self.name,
            None if self.sequences is None else [self.sequences[i] for i in index],
        )


# ---------------------------------------------------------------------------
# Quantum-dot charge stability diagrams
# ---------------------------------------------------------------------------


def _line_family(xx: np.ndarray, yy: np.ndarray, slope: float, rng: np.random.Generator) -> np.ndarray:
    """Soft parallel lines y = -slope * x + c with random spacing, phase and width."""
    spacing = rng.uniform(*LINE_SPACING)
    width = rng.uniform(*LINE_WIDTH)
    phase = rng.uniform(0.0, spacing)
    t = (yy + slope * xx) / np.hypot(1.0, slope)
    d = np.mod(t - phase + spacing / 2, spacing) - spacing / 2
    return np.exp(-0.5 * (d / width) ** 2)


def dot_image(label: int, noise_level: float, rng: np.random.Generator) -> np.ndarray:
    """One 50x50 diagram in [0, 1]: one line family (label 0) or two with bright vertices (label 1)."""
    axis = np.linspace(0.0, 1.0, DOT_SIZE)
    xx, yy = np.meshgrid(axis, axis)
    amplitude = rng.uniform(0.6, 1.0)
    shallow = _line_family(xx, yy, rng.uniform(*SHALLOW_SLOPE), rng)
    if label == 0:
        image = amplitude * shallow
    else:
        steep = _line_family(xx, yy, rng.uniform(*STEEP_SLOPE), rng)
        image = amplitude * (np.maximum(shallow, steep) + 0.5 * shallow * steep)
    if noise_level > 0:
        image = image + rng.normal(0.0, PIXEL_NOISE * noise_level, size=image.shape)
        for _ in range(int(rng.integers(0, MAX_STREAKS + 1))):
            row = int(rng.integers(0, DOT_SIZE))
            height = int(rng.integers(1, 3))
            image[row:row + height, :] += rng.choice([-1.0, 1.0]) * 0.3 * noise_level
    return np.clip(image, 0.0, 1.0)


def gen_quantum_dot(n: int, noise_level: float, seed: int) -> Dataset:
    """Balanced single-dot (0) / double-dot (1) diagrams, flattened to 2500 features."""
    if n < 2:
        raise ArgumentError(f"need n >= 2 so both classes are present, got {n}")
    if not 0.0 <= noise_level <= 1.0:
        raise ArgumentError(f"noise_level must lie in [0, 1], got {noise_level}")
    labels = np.arange(n) % 2
    images = np.stack([dot_image(int(labels[i]), noise_level, task_rng(seed, i)) for i in range(n)])
    logger.debug(f"generated {n} quantum-dot diagrams at noise level {noise_level}")
    return Dataset(images.reshape(n, -1), labels, name="quantum-dot")


def orientation_histogram(image: np.ndarray, bins: int = 36) -> np.ndarray:
    """Gradient-magnitude weighted histogram of edge orientations over [0, pi)."""
    gy, gx = np.gradient(np.asarray(image, dtype=np.float64))
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    hist, _ = np.histogram(angle, bins=bins, range=(0.0, np.pi), weights=np.hypot(gx, gy))
    return hist


def orientation_modes(image: np.ndarray, bins: int = 36, threshold: float = 0.3, min_separation: int = 4) -> int:
    """Number of dominant orientation modes in a diagram."""
    hist = orientation_histogram(image, bins)
    kernel = np.array([1.0, 2.0, 3.0, 2.0, 1.0])
    padded = np.concatenate([hist[-2:], hist, hist[:2]])
    smooth = np.convolve(padded, kernel / kernel.sum(), mode="valid")
    if smooth.max() <= 0:
        return 0
    peaks = [
        i for i in range(bins)
        if smooth[i] >= threshold * smooth.max()
        and smooth[i] >= smooth[(i - 1) % bins] and smooth[i] > smooth[(i + 1) % bins]
    ]
    peaks.sort(key=lambda i: -smooth[i])
    kept: list[int] = []
    for p in peaks:
        if all(min(abs(p - k), bins - abs(p - k)) >= min_separation for k in kept):
            kept.append(p)
    return len(kept)


# ---------------------------------------------------------------------------
# Transcription-factor binding sites
# ---------------------------------------------------------------------------


def one_hot(sequence: str) -> np.ndarray:
    """4 * len(sequence) binary vector, bases ordered A, C, G, T within each position."""
    codes = np.array([BASES.index(b) for b in sequence])
    out = np.zeros((len(sequence), 4))
    out[np.arange(len(sequence)), codes] = 1.0
    return out.reshape(-1)


def _check_motif(motif: str) -> None:
    if not motif or set(motif) - set(BASES):
        raise ArgumentError(f"motif must be a non-empty string over {BASES}, got {motif!r}")
    if len(motif) >= TFBS_LENGTH:
        raise ArgumentError(f"motif length {len(motif)} must be below {TFBS_LENGTH}")


def tfbs_sequence(label: int, motif: str, mutate: bool, rng: np.random.Generator) -> str:
    bases = list(rng.choice(list(BASES), size=TFBS_LENGTH))
    if label == 1:
        planted = list(motif)
        if mutate and rng.random() < 0.5:
            pos = int(rng.integers(len(motif)))
            planted[pos] = rng.choice([b for b in BASES if b != planted[pos]])
        start = int(rng.integers(0, TFBS_LENGTH - len(motif) + 1))
        bases[start:start + len(motif)] = planted
    return "".join(bases)


def gen_tfbs(n: int, motif: str = "TGACTCA", seed: int = 0, mutate: bool = False) -> Dataset:
    """Balanced 101-base sequences; positives carry the motif at a random position."""
    _check_motif(motif)
    if n < 2:
        raise ArgumentError(f"need n >= 2 so both classes are present, got {n}")
    labels = np.arange(n) % 2
    sequences = [tfbs_sequence(int(labels[i]), motif, mutate, task_rng(seed, i)) for i in range(n)]
    features = np.stack([one_hot(s) for s in sequences])
    return Dataset(features, labels, name="tfbs", sequences=sequences)


# ---------------------------------------------------------------------------
# CSV files and splitting
# ---------------------------------------------------------------------------


def _data_lines(path: Path) -> list[str]:
    with open(path, "r") as f:
        return [line for line in f if line.strip() and not line.startswith("#")]


def save_dataset_csv(path: Path | str, dataset: Dataset, comment: str | None = None) -> None:
    """Write `f0..f{D-1},label` rows, preceded by an optional `# ...` comment line."""
    header = ",".join([f"f{i}" for i in range(dataset.dim)] + ["label"])
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(header + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            f.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def load_dataset_csv(path: Path | str) -> Dataset:
    path = Path(path)
    lines = _data_lines(path)
    if len(lines) < 2:
        raise DataError(f"{path}: no data rows")
    columns = lines[0].strip().split(",")
    expected = [f"f{i}" for i in range(len(columns) - 1)] + ["label"]
    if columns != expected:
        raise FormatError(f"{path}: header must be f0..f{{D-1}},label, got {lines[0].strip()!r}")
    try:
        table = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as e:
        raise FormatError(f"{path}: {e}")
    labels = table[:, -1]
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        raise FormatError(f"{path}: labels must be non-negative integers")
    return Dataset(table[:, :-1], labels.astype(np.int64), name=path.stem)


def load_labels_csv(path: Path | str) -> Dataset:
    """`id,label` rows; features are left empty and filled by an embedding block."""
    path = Path(path)
    lines = _data_lines(path)
    if len(lines) < 2 or lines[0].strip() != "id,label":
        raise FormatError(f"{path}: expected header 'id,label'")
    try:
        table = np.loadtxt(lines[1:], delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError as e:
        raise FormatError(f"{path}: {e}")
    ids = table[:, 0]
    return Dataset(ids.reshape(-1, 1).astype(np.float64), table[:, 1], ids=ids, name=path.stem)


def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per-class shuffled split; each class with >= 2 rows contributes >= 1 test row."""
    if len(dataset) == 0:
        raise DataError("cannot split an empty dataset")
    if not 0.0 < test_fraction < 1.0:
        raise ArgumentError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = task_rng(seed)
    train_idx, test_idx = [], []
    for label in sorted(dataset.class_counts()):
        members = rng.permutation(np.flatnonzero(dataset.labels == label))
        n_test = int(round(len(members) * test_fraction))
        if len(members) >= 2:
            n_test = min(max(n_test, 1), len(members) - 1)
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return dataset.subset(train), dataset.subset(test)
