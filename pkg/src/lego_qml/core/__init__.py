"""Core functionality for lego-qml."""

from .blocks import EmbeddingBlock, FcHead, FeatureBlock, IdentityBlock, PcaBlock, TtnBlock
from .checks import CheckReport, CheckRunner
from .datasets import Dataset
from .executor import CircuitExecutor
from .experiment_manager import ExperimentManager, RunResult
from .training import Assembly, TrainResult

__all__ = [
    "EmbeddingBlock",
    "FcHead",
    "FeatureBlock",
    "IdentityBlock",
    "PcaBlock",
    "TtnBlock",
    "CheckReport",
    "CheckRunner",
    "Dataset",
    "CircuitExecutor",
    "ExperimentManager",
    "RunResult",
    "Assembly",
    "TrainResult",
]
