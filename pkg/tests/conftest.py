"""Shared fixtures for the lego-qml test suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from lego_qml.models import AnsatzSpec, EvalMode
from lego_qml.utils import task_rng


@pytest.fixture
def rng() -> np.random.Generator:
    return task_rng(1234)


@pytest.fixture
def analytic() -> EvalMode:
    return EvalMode.analytic()


@pytest.fixture
def small_ansatz() -> AnsatzSpec:
    return AnsatzSpec(num_qubits=3, depth=2, entangler="ring", measure_qubits=2)


@pytest.fixture
def experiment_data() -> dict:
    """A small PCA + VQC experiment that trains in a few seconds."""
    return {
        "schemaVersion": 1,
        "runName": "tiny",
        "seed": 7,
        "dataset": {
            "source": {"generator": "quantum-dot", "n": 40, "noiseLevel": 0.0},
            "testFraction": 0.25,
        },
        "featureBlock": {"kind": "pca", "components": 3},
        "head": {"kind": "vqc", "qubits": 3, "depth": 1},
        "training": {"epochs": 2, "batchSize": 10, "optimizer": "adam", "lr": 0.05},
        "variants": {"heads": [{"kind": "fc"}]},
        "outputDir": "runs",
    }


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a config dict to tmp_path and return its path."""
    def _write(data: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return path

    return _write
