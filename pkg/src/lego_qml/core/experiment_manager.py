"""Experiment management: config validation, the full training pipeline, sweeps and artifacts."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, InvariantViolationError
from ..models import (
    AnsatzSpec,
    BoundReport,
    CsvDatasetSpec,
    EmbeddingBlockSpec,
    EmbeddingDatasetSpec,
    EvalMode,
    ExperimentConfig,
    FcHeadSpec,
    FcState,
    IdentityBlockSpec,
    MetricsRow,
    ModelCheckpoint,
    PcaBlockSpec,
    QuantumDotDatasetSpec,
    TfbsDatasetSpec,
    TtnBlockSpec,
    VqcHeadSpec,
)
from ..utils import load_config, ordered_map, resolve_workers, task_rng, validate_config, validate_file_exists
from .blocks import FcHead, FeatureBlock, IdentityBlock, embedding_load, fit_pca, pretrain_ttn, random_ttn
from .datasets import Dataset, gen_quantum_dot, gen_tfbs, load_dataset_csv, load_labels_csv, save_dataset_csv, \
    stratified_split
from .encoding import NormalizerSpec, fit_normalizer
from .persistence import (
    block_reference,
    load_model,
    load_pca,
    load_ttn,
    provenance_comment,
    save_json,
    save_model,
    save_pca,
    save_report,
    save_ttn,
    write_metrics_csv,
    write_table_csv,
)
from .theory import build_bound_report
from .training import EVAL_STREAM, Assembly, TrainResult, evaluate, train
from .vqc import init_theta

logger = logging.getLogger(__name__)

INIT_STREAM = 0
BUDGET_TOLERANCE = 0.25
SWEEP_AXES = ("qubits", "noise", "block", "head", "data-noise")
SWEEP_COLUMNS = ["axis_value", "seed", "final_test_acc", "final_test_loss", "param_count", "config_hash"]


@dataclass
class RunResult:
    """Artifacts and final metrics of one experiment run."""
    run_dir: Path
    config_hash: str
    seed: int
    history: list[MetricsRow]
    param_count: int
    block_checksum: str
    report: BoundReport | None = None

    @property
    def final(self) -> MetricsRow:
        return self.history[-1]


def with_overrides(config: ExperimentConfig, seed: int | None = None, output_dir: str | None = None,
                   allow_budget_mismatch: bool | None = None) -> ExperimentConfig:
    """Apply command-line overrides. A new master seed also drives training."""
    data = config.model_dump(mode="json", by_alias=True)
    if seed is not None:
        data["seed"] = seed
        data["training"]["seed"] = None
    if output_dir is not None:
        data["outputDir"] = output_dir
    if allow_budget_mismatch:
        data["allowBudgetMismatch"] = True
    return validate_config(ExperimentConfig, data)


class ExperimentManager:
    """Runs experiments described by an ExperimentConfig."""

    def __init__(self, config: ExperimentConfig, config_dir: Path | str | None = None, workers: int | None = None):
        self.config = config
        self.config_dir = Path(config_dir) if config_dir is not None else Path.cwd()
        self.workers = resolve_workers(workers)

    @classmethod
    def from_file(cls, path: Path | str, seed: int | None = None, output_dir: str | None = None,
                  allow_budget_mismatch: bool = False, workers: int | None = None) -> "ExperimentManager":
        path = Path(path)
        config = with_overrides(load_config(ExperimentConfig, path), seed, output_dir, allow_budget_mismatch)
        return cls(config, path.parent, workers)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @property
    def seed(self) -> int:
        return self.config.training_seed

    @property
    def output_root(self) -> Path:
        return self.resolve_path(self.config.output_dir) / self.config.run_name

    def resolve_path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.config_dir / path

    def _require(self, value: str | None, field: str) -> Path | None:
        if value is None:
            return None
        return validate_file_exists(self.resolve_path(value), field=field)

    def validate(self) -> None:
        """Check every referenced file and the block/head pairing."""
        config = self.config
        source = config.dataset.source
        if isinstance(source, CsvDatasetSpec):
            self._require(source.path, "dataset.source.path")
        elif isinstance(source, EmbeddingDatasetSpec):
            self._require(source.labels, "dataset.source.labels")
            if not isinstance(config.feature_block, EmbeddingBlockSpec):
                raise ConfigurationError("an embedding dataset needs an embedding feature block", field="featureBlock")
        blocks = [("featureBlock", config.feature_block)] + [
            (f"variants.blocks.{i}", b) for i, b in enumerate(config.variants.blocks)
        ]
        for prefix, block in blocks:
            if isinstance(block, (PcaBlockSpec, TtnBlockSpec)):
                self._require(block.checkpoint, f"{prefix}.checkpoint")
            elif isinstance(block, EmbeddingBlockSpec):
                self._require(block.path, f"{prefix}.path")
            if isinstance(block, TtnBlockSpec) and block.pretrain is not None:
                downstream = getattr(source, "seed", None)
                downstream = config.seed if downstream is None else downstream
                if block.pretrain.seed == downstream:
                    raise ConfigurationError(
                        f"source-task seed {block.pretrain.seed} must differ from the dataset seed",
                        field=f"{prefix}.pretrain.seed",
                    )
        head = config.head
        width = config.block_width
        if isinstance(head, VqcHeadSpec) and width is not None and width != head.qubits:
            raise ConfigurationError(
                f"feature block outputs {width} features but the VQC head has {head.qubits} qubits",
                field="featureBlock",
            )
        if isinstance(head, FcHeadSpec) and head.inputs is not None and width is not None and head.inputs != width:
            raise ConfigurationError(f"FC head expects {head.inputs} inputs, block gives {width}", field="head.inputs")

    # -----------------------------------------------------------------------
    # Pipeline stages
    # -----------------------------------------------------------------------

    def eval_mode(self) -> EvalMode:
        mode = self.config.training.eval_mode
        return EvalMode(kind=mode.kind, shots=mode.shots, noise=self.config.effective_noise)

    def load_dataset(self) -> Dataset:
        source = self.config.dataset.source
        seed = getattr(source, "seed", None)
        seed = self.config.seed if seed is None else seed
        if isinstance(source, QuantumDotDatasetSpec):
            return gen_quantum_dot(source.n, source.noise_level, seed)
        if isinstance(source, TfbsDatasetSpec):
            return gen_tfbs(source.n, source.motif, seed, source.mutate)
        if isinstance(source, CsvDatasetSpec):
            return load_dataset_csv(self._require(source.path, "dataset.source.path"))
        return load_labels_csv(self._require(source.labels, "dataset.source.labels"))

    def split(self, dataset: Dataset) -> tuple[Dataset, Dataset]:
        split_seed = self.config.dataset.split_seed
        return stratified_split(
            dataset, self.config.dataset.test_fraction, self.config.seed if split_seed is None else split_seed
        )

    def build_block(self, train_set: Dataset) -> FeatureBlock:
        """Fit or load the feature block and freeze it."""
        spec = self.config.feature_block
        if isinstance(spec, PcaBlockSpec):
            if spec.checkpoint:
                block = load_pca(self._require(spec.checkpoint, "featureBlock.checkpoint"))
            else:
                block = fit_pca(train_set.features, spec.components)
            if block.width != spec.components:
                raise ConfigurationError(
                    f"PCA checkpoint has {block.width} components, config asks for {spec.components}",
                    field="featureBlock.components",
                )
            return block.freeze()
        if isinstance(spec, TtnBlockSpec):
            return self._build_ttn(spec)
        if isinstance(spec, EmbeddingBlockSpec):
            return embedding_load(self._require(spec.path, "featureBlock.path")).freeze()
        return IdentityBlock(train_set.dim).freeze()

    def _build_ttn(self, spec: TtnBlockSpec) -> FeatureBlock:
        if spec.checkpoint:
            block = load_ttn(self._require(spec.checkpoint, "featureBlock.checkpoint"))
            if block.input_factors != spec.input_factors or block.output_factors != spec.output_factors:
                raise ConfigurationError(
                    f"TTN checkpoint factors {block.input_factors} -> {block.output_factors} do not match the config",
                    field="featureBlock.inputFactors",
                )
            return block.freeze()
        block = random_ttn(spec, task_rng(spec.init_seed))
        if spec.pretrain is None:
            return block.freeze()
        source = spec.pretrain
        logger.info(f"pretraining TTN block on a {source.generator} source task (n={source.n}, seed={source.seed})")
        if source.generator == "quantum-dot":
            data = gen_quantum_dot(source.n, source.noise_level, source.seed)
        else:
            data = gen_tfbs(source.n, seed=source.seed, mutate=source.noise_level > 0)
        return pretrain_ttn(block, data.features, data.labels, data.num_classes, source.epochs, source.lr,
                            source.seed, source.batch_size)

    def build_assembly(self, block: FeatureBlock, train_set: Dataset) -> Assembly:
        config = self.config
        training = config.training
        raw = block.forward(train_set.ids if block.kind == "embedding" else train_set.features)
        normalizer = fit_normalizer(raw, training.normalizer)
        rng = task_rng(self.seed, INIT_STREAM)
        head = config.head
        if isinstance(head, VqcHeadSpec):
            ansatz = AnsatzSpec(
                num_qubits=head.qubits, depth=head.depth, entangler=head.entangler,
                measure_qubits=min(training.num_classes, head.qubits),
            )
            return Assembly(block, normalizer, training.num_classes, ansatz=ansatz,
                            theta=init_theta(ansatz, rng, training.init_scale), readout=training.readout,
                            projection_seed=self.seed)
        fc = FcHead.random(training.num_classes, block.width, rng, training.init_scale)
        return Assembly(block, normalizer, training.num_classes, fc=fc)

    def checkpoint(self, assembly: Assembly, block_path: str | None) -> ModelCheckpoint:
        return ModelCheckpoint(
            block=block_reference(assembly.block, block_path),
            normalizer=assembly.normalizer.to_state(),
            ansatz=assembly.ansatz,
            theta=None if assembly.theta is None else assembly.theta.tolist(),
            fc=None if assembly.fc is None else FcState(weight=assembly.fc.weight.tolist(),
                                                        bias=assembly.fc.bias.tolist()),
            readout=assembly.readout,
            num_classes=assembly.num_classes,
            projection_seed=assembly.projection_seed,
            source_config_hash=self.config_hash,
            seed=self.seed,
        )

    def _persist_block(self, block: FeatureBlock, run_dir: Path) -> str | None:
        spec = self.config.feature_block
        if isinstance(spec, TtnBlockSpec):
            save_ttn(run_dir / "ttn_block.bin", block)
            return "ttn_block.bin"
        if isinstance(spec, EmbeddingBlockSpec):
            return str(self.resolve_path(spec.path).resolve())
        if isinstance(spec, PcaBlockSpec):
            save_pca(run_dir / "pca_block.json", block, self.seed, self.config_hash)
        return None

    # -----------------------------------------------------------------------
    # Commands
    # -----------------------------------------------------------------------

    def run(self, run_dir: Path | None = None, workers: int | None = None) -> RunResult:
        """generate/load -> fit/load block -> freeze -> train -> evaluate -> persist."""
        self.validate()
        config = self.config
        run_dir = Path(run_dir) if run_dir is not None else self.output_root
        run_dir.mkdir(parents=True, exist_ok=True)
        config_hash = self.config_hash
        logger.info(f"run {config.run_name}: config {config_hash}, seed {self.seed}, output {run_dir}")

        train_set, test_set = self.split(self.load_dataset())
        block = self.build_block(train_set)
        checksum = block.checksum()
        assembly = self.build_assembly(block, train_set)
        result = train(assembly, train_set, test_set, config.training, self.eval_mode(), self.seed,
                       workers or self.workers)
        if block.checksum() != checksum:
            raise InvariantViolationError("frozen block checksum changed between assembly and persistence")

        write_metrics_csv(run_dir / "metrics.csv", result.history, config_hash, self.seed,
                          include_wallclock=not config.deterministic_outputs)
        save_model(run_dir / "model.json", self.checkpoint(assembly, self._persist_block(block, run_dir)))
        report = self._report(assembly, train_set, result, run_dir)
        if not config.deterministic_outputs:
            save_json(run_dir / "timing.json", {
                "configHash": config_hash, "seed": self.seed, "wallclockSeconds": result.wallclock_seconds,
            })
        final = result.history[-1]
        logger.info(f"run {config.run_name} finished: test accuracy {final.test_accuracy:.3f}, "
                    f"{result.wallclock_seconds:.1f}s")
        return RunResult(run_dir, config_hash, self.seed, result.history, assembly.head_param_count, checksum, report)

    def _report(self, assembly: Assembly, train_set: Dataset, result: TrainResult, run_dir: Path) -> BoundReport | None:
        theory = self.config.theory
        if not theory.report:
            return None
        if not assembly.is_quantum:
            logger.info("bound report skipped: the FC head has no circuit constants to estimate")
            return None
        noise = self.config.effective_noise
        report = build_bound_report(
            assembly, train_set, result, self.config_hash, self.seed,
            tau=0.0 if noise is None else noise.tau_meas, n_samples=theory.n_samples,
            n_probes=theory.n_probes, target=theory.target, workers=self.workers,
        )
        save_report(run_dir / "bound_report.json", report)
        return report

    def evaluate_model(self, model_path: Path | str, out_path: Path | str | None = None) -> tuple[float, float]:
        """Evaluate a saved model on this config's test split."""
        checkpoint, block = load_model(model_path)
        if checkpoint.fc is not None:
            assembly = Assembly(block, NormalizerSpec.from_state(checkpoint.normalizer), checkpoint.num_classes,
                                fc=FcHead(np.array(checkpoint.fc.weight), np.array(checkpoint.fc.bias)))
        else:
            assembly = Assembly(block, NormalizerSpec.from_state(checkpoint.normalizer), checkpoint.num_classes,
                                ansatz=checkpoint.ansatz, theta=np.array(checkpoint.theta),
                                readout=checkpoint.readout, projection_seed=checkpoint.projection_seed)
        _, test_set = self.split(self.load_dataset())
        loss, acc = evaluate(assembly, test_set, self.eval_mode(), task_rng(checkpoint.seed, 0, EVAL_STREAM, 1))
        logger.info(f"evaluated {model_path}: test loss {loss:.4f}, accuracy {acc:.3f}")
        if out_path is not None:
            save_json(Path(out_path), {
                "configHash": checkpoint.source_config_hash, "seed": checkpoint.seed,
                "testLoss": loss, "testAccuracy": acc,
            })
        return loss, acc

    def generate_data(self, out_path: Path | str) -> Dataset:
        dataset = self.load_dataset()
        save_dataset_csv(out_path, dataset, provenance_comment(self.config_hash, self.config.seed))
        logger.info(f"wrote {len(dataset)} rows ({dataset.class_counts()}) to {out_path}")
        return dataset

    def fit_pca_checkpoint(self, out_path: Path | str) -> FeatureBlock:
        spec = self.config.feature_block
        if not isinstance(spec, PcaBlockSpec):
            raise ConfigurationError("fit-pca needs a pca feature block", field="featureBlock.kind")
        train_set, _ = self.split(self.load_dataset())
        block = fit_pca(train_set.features, spec.components).freeze()
        save_pca(out_path, block, self.config.seed, self.config_hash)
        return block

    def pretrain_ttn_checkpoint(self, out_path: Path | str) -> FeatureBlock:
        spec = self.config.feature_block
        if not isinstance(spec, TtnBlockSpec):
            raise ConfigurationError("pretrain-ttn needs a ttn feature block", field="featureBlock.kind")
        block = self._build_ttn(spec)
        save_ttn(out_path, block)
        return block

    # -----------------------------------------------------------------------
    # Sweeps
    # -----------------------------------------------------------------------

    def variant(self, axis: str, value: str) -> ExperimentConfig:
        """The config for one point of a sweep axis."""
        config = self.config
        data = config.model_dump(mode="json", by_alias=True)
        if axis == "qubits":
            qubits = int(value)
            block = data["featureBlock"]
            if block["kind"] != "pca":
                raise ConfigurationError("the qubit sweep resizes a pca block", field="featureBlock.kind")
            block["components"] = qubits
            block.pop("checkpoint", None)
            if data["head"]["kind"] == "vqc":
                data["head"]["qubits"] = qubits
            else:
                data["head"]["inputs"] = None
        elif axis == "noise":
            data["noise"]["pDepol1q"] = float(value)
        elif axis == "data-noise":
            if data["dataset"]["source"]["generator"] != "quantum-dot":
                raise ConfigurationError("the data-noise sweep needs a quantum-dot dataset", field="dataset.source")
            data["dataset"]["source"]["noiseLevel"] = float(value)
        elif axis == "block":
            data["featureBlock"] = self._pick_variant(data["featureBlock"], data["variants"]["blocks"], value, "blocks")
        elif axis == "head":
            data["head"] = self._pick_variant(data["head"], data["variants"]["heads"], value, "heads")
        else:
            raise ConfigurationError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}",
                                     field="axis")
        return validate_config(ExperimentConfig, data)

    @staticmethod
    def _pick_variant(current: dict, candidates: list[dict], kind: str, field: str) -> dict:
        for spec in [current, *candidates]:
            if spec["kind"] == kind:
                return spec
        raise ConfigurationError(f"no {kind!r} entry among featureBlock/head and variants.{field}",
                                 field=f"variants.{field}")

    @staticmethod
    def head_width(config: ExperimentConfig) -> int:
        """Input width of the head: block output, FC `inputs`, or the raw width of an identity block."""
        width = config.block_width
        if width is None and isinstance(config.head, FcHeadSpec):
            width = config.head.inputs
        if width is None and isinstance(config.feature_block, IdentityBlockSpec):
            width = getattr(config.dataset.source, "feature_dim", None)
        if width is None:
            raise ConfigurationError(
                f"cannot tell the {config.feature_block.kind} block's output width; set head.inputs",
                field="head.inputs",
            )
        return width

    def check_budget(self, configs: list[ExperimentConfig]) -> None:
        """Refuse FC/VQC comparisons whose parameter counts differ by more than 25%."""
        counts = {
            type(c.head).__name__: c.head.param_count(c.training.num_classes, self.head_width(c)) for c in configs
        }
        vqc, fc = counts.get("VqcHeadSpec"), counts.get("FcHeadSpec")
        if vqc is None or fc is None:
            return
        mismatch = abs(fc - vqc) / vqc
        if mismatch <= BUDGET_TOLERANCE:
            logger.info(f"parameter budget matched: FC {fc} vs VQC {vqc}")
            return
        message = f"FC head has {fc} parameters, VQC head has {vqc} ({mismatch:.0%} apart)"
        if not self.config.allow_budget_mismatch:
            raise ConfigurationError(f"{message}; pass --allow-budget-mismatch to run anyway", field="head")
        logger.warning(f"{message}; continuing because the budget check is overridden")

    def sweep(self, axis: str, values: list[str], seeds: list[int], jobs: int = 1) -> list[list]:
        """One run per (value, seed); writes sweep_<axis>.csv and returns its rows."""
        if not values or not seeds:
            raise ConfigurationError("a sweep needs at least one value and one seed", field="values")
        configs = [self.variant(axis, str(v)) for v in values]
        if axis == "head":
            self.check_budget(configs)
        root = self.output_root / f"sweep-{axis}"
        root.mkdir(parents=True, exist_ok=True)
        tasks = [(value, variant, seed) for value, variant in zip(values, configs) for seed in seeds]
        pool = resolve_workers(max(1, jobs))
        logger.info(f"sweep over {axis}: {len(values)} values x {len(seeds)} seeds = {len(tasks)} runs")

        def run_one(task: tuple) -> list:
            value, variant, seed = task
            manager = ExperimentManager(with_overrides(variant, seed=seed), self.config_dir, self.workers)
            result = manager.run(root / f"{axis}-{value}" / f"seed-{seed}", workers=1 if pool > 1 else None)
            return [str(value), seed, result.final.test_accuracy, result.final.test_loss, result.param_count,
                    result.config_hash]

        rows = ordered_map(run_one, tasks, pool)
        write_table_csv(root / f"sweep_{axis}.csv", SWEEP_COLUMNS, rows,
                        provenance_comment(self.config_hash, self.config.seed))
        return rows
