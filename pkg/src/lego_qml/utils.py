"""Utility functions for lego-qml."""

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import yaml
from pydantic import BaseModel, ValidationError
from rich.logging import RichHandler

from .errors import ConfigurationError

T = TypeVar("T", bound=BaseModel)
R = TypeVar("R")

THREADS_ENV = "LEGOQML_THREADS"


def read_structured_file(file_path: Path | str) -> dict:
    """Read a JSON or YAML mapping, chosen by file suffix."""
    path = Path(file_path)
    with open(path, "r") as f:
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(f)
        else:
            data = json.load(f)
    if not isinstance(data, dict):
        raise ConfigurationError(f"expected a mapping at top level of {path}")
    return data


def load_config(config_class: type[T], file_path: Path | str) -> T:
    """Load a Pydantic model from a JSON or YAML file."""
    return validate_config(config_class, read_structured_file(validate_file_exists(file_path)))


def validate_config(config_class: type[T], data: dict) -> T:
    """model_validate, with the first validation error raised as a ConfigurationError naming its field."""
    try:
        return config_class.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigurationError(first["msg"], field=field) from e


def validate_file_exists(file_path: Path | str, field: str | None = None) -> Path:
    """Validate that a file exists and return Path object."""
    path = Path(file_path)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}", field=field)
    return path


def canonical_json(data: object) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def short_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def array_checksum(*arrays: np.ndarray) -> str:
    """SHA-256 over dtype, shape and bytes of each array, in argument order."""
    digest = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        digest.update(str(arr.dtype).encode())
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()


def task_rng(seed: int, *indices: int) -> np.random.Generator:
    """Independent counter-based stream for the task identified by (seed, *indices)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, indices)])))


def spawn_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: requested value capped by LEGOQML_THREADS, default CPU count."""
    limit = os.environ.get(THREADS_ENV)
    workers = requested or os.cpu_count() or 1
    if limit:
        try:
            workers = min(workers, max(1, int(limit)))
        except ValueError:
            raise ConfigurationError(f"expected an integer, got {limit!r}", field=THREADS_ENV)
    return max(1, workers)


def ordered_map(fn: Callable[..., R], items: Iterable, workers: int = 1) -> list[R]:
    """Map in a thread pool; results come back in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked(n: int, size: int) -> list[range]:
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def parse_int_list(text: str | Sequence[int]) -> list[int]:
    if isinstance(text, str):
        return [int(part) for part in text.split(",") if part.strip()]
    return [int(v) for v in text]


def setup_logging(verbose: bool = False) -> None:
    """Route library logging through rich."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )
