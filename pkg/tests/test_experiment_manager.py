import csv
import json

import pytest

from lego_qml.errors import ConfigurationError
from lego_qml.core.experiment_manager import SWEEP_COLUMNS, ExperimentManager, with_overrides
from lego_qml.core.persistence import METRICS_HEADER
from lego_qml.models import EmbeddingBlockSpec


def _manager(write_config, data: dict, **kwargs) -> ExperimentManager:
    return ExperimentManager.from_file(write_config(data), workers=1, **kwargs)


def test_run_writes_every_artifact(write_config, experiment_data, tmp_path):
    manager = _manager(write_config, experiment_data)
    result = manager.run()
    run_dir = tmp_path / "runs" / "tiny"
    assert result.run_dir == run_dir
    for name in ("metrics.csv", "model.json", "pca_block.json"):
        assert (run_dir / name).exists()
    assert not (run_dir / "bound_report.json").exists()
    assert not (run_dir / "timing.json").exists()

    lines = (run_dir / "metrics.csv").read_text().splitlines()
    assert lines[0] == f"# config_hash={manager.config_hash} seed=7"
    assert lines[1] == METRICS_HEADER
    assert len(lines) == 2 + 3
    assert result.param_count == 9
    model = json.loads((run_dir / "model.json").read_text())
    assert model["block"]["checksum"] == result.block_checksum
    assert model["configHash"] == manager.config_hash


def test_runs_are_byte_identical_across_worker_counts(write_config, experiment_data, tmp_path):
    path = write_config(experiment_data)
    first = ExperimentManager.from_file(path, workers=1).run(tmp_path / "a")
    second = ExperimentManager.from_file(path, workers=4).run(tmp_path / "b")
    names = sorted(p.name for p in first.run_dir.iterdir())
    assert names == sorted(p.name for p in second.run_dir.iterdir())
    for name in names:
        assert (first.run_dir / name).read_bytes() == (second.run_dir / name).read_bytes()


def test_wallclock_output_is_opt_in(write_config, experiment_data, tmp_path):
    experiment_data["deterministicOutputs"] = False
    result = _manager(write_config, experiment_data).run()
    timing = json.loads((result.run_dir / "timing.json").read_text())
    assert timing["seed"] == 7
    assert timing["wallclockSeconds"] > 0
    last = (result.run_dir / "metrics.csv").read_text().splitlines()[-1]
    assert not last.endswith(",")


def test_saved_model_evaluates_to_the_final_test_metrics(write_config, experiment_data, tmp_path):
    manager = _manager(write_config, experiment_data)
    result = manager.run()
    loss, acc = manager.evaluate_model(result.run_dir / "model.json", tmp_path / "eval.json")
    assert loss == pytest.approx(result.final.test_loss)
    assert acc == pytest.approx(result.final.test_accuracy)
    assert json.loads((tmp_path / "eval.json").read_text())["testAccuracy"] == acc


def test_seed_override_replaces_master_and_training_seed(write_config, experiment_data):
    experiment_data["training"]["seed"] = 99
    manager = _manager(write_config, experiment_data, seed=3)
    assert manager.config.seed == 3
    assert manager.seed == 3
    assert with_overrides(manager.config).config_hash() == manager.config_hash


def test_missing_checkpoint_names_the_field(write_config, experiment_data):
    experiment_data["featureBlock"]["checkpoint"] = "missing.json"
    manager = _manager(write_config, experiment_data)
    with pytest.raises(ConfigurationError) as excinfo:
        manager.run()
    assert excinfo.value.field == "featureBlock.checkpoint"


def test_missing_head_is_a_configuration_error(write_config, experiment_data):
    del experiment_data["head"]
    with pytest.raises(ConfigurationError) as excinfo:
        _manager(write_config, experiment_data)
    assert excinfo.value.field == "head"


def test_block_width_must_match_qubits(write_config, experiment_data):
    experiment_data["featureBlock"]["components"] = 4
    with pytest.raises(ConfigurationError, match="3 qubits"):
        _manager(write_config, experiment_data).validate()


def test_pretrain_seed_must_differ_from_dataset_seed(write_config, experiment_data):
    experiment_data["featureBlock"] = {
        "kind": "ttn", "inputFactors": [50, 50], "outputFactors": [3, 1], "ranks": [2],
        "pretrain": {"seed": 7, "n": 10, "epochs": 1},
    }
    with pytest.raises(ConfigurationError) as excinfo:
        _manager(write_config, experiment_data).validate()
    assert excinfo.value.field == "featureBlock.pretrain.seed"


def test_fit_pca_checkpoint_is_reused_by_training(write_config, experiment_data, tmp_path):
    manager = _manager(write_config, experiment_data)
    block = manager.fit_pca_checkpoint(tmp_path / "pca.json")
    experiment_data["featureBlock"]["checkpoint"] = "pca.json"
    result = _manager(write_config, experiment_data).run(tmp_path / "reuse")
    assert result.block_checksum == block.checksum()


def test_qubit_sweep_writes_one_row_per_run(write_config, experiment_data, tmp_path):
    manager = _manager(write_config, experiment_data)
    rows = manager.sweep("qubits", ["2", "3"], [0, 1])
    assert len(rows) == 4
    assert [r[:2] for r in rows] == [["2", 0], ["2", 1], ["3", 0], ["3", 1]]
    assert [r[4] for r in rows] == [6, 6, 9, 9]
    csv_path = tmp_path / "runs" / "tiny" / "sweep-qubits" / "sweep_qubits.csv"
    with open(csv_path) as f:
        table = list(csv.reader(line for line in f if not line.startswith("#")))
    assert table[0] == SWEEP_COLUMNS
    assert len(table) == 5
    assert (tmp_path / "runs" / "tiny" / "sweep-qubits" / "qubits-2" / "seed-1" / "metrics.csv").exists()


def test_sweep_jobs_respect_the_thread_limit(write_config, experiment_data, monkeypatch):
    from lego_qml.core import experiment_manager

    pools = []
    real_map = experiment_manager.ordered_map

    def recording_map(fn, items, workers=1):
        pools.append(workers)
        return real_map(fn, items, workers)

    monkeypatch.setenv("LEGOQML_THREADS", "2")
    monkeypatch.setattr(experiment_manager, "ordered_map", recording_map)
    rows = _manager(write_config, experiment_data).sweep("qubits", ["2"], [0, 1, 2], jobs=8)
    assert len(rows) == 3
    assert pools == [2]


def test_head_sweep_with_matched_budget_runs_both_heads(write_config, experiment_data):
    rows = _manager(write_config, experiment_data).sweep("head", ["vqc", "fc"], [0])
    assert [(r[0], r[4]) for r in rows] == [("vqc", 9), ("fc", 8)]


def test_head_sweep_refuses_mismatched_budget(write_config, experiment_data):
    experiment_data["head"]["depth"] = 3
    with pytest.raises(ConfigurationError, match="allow-budget-mismatch"):
        _manager(write_config, experiment_data).sweep("head", ["vqc", "fc"], [0])


def test_budget_override_only_warns(write_config, experiment_data):
    experiment_data["head"]["depth"] = 3
    manager = _manager(write_config, experiment_data, allow_budget_mismatch=True)
    manager.check_budget([manager.variant("head", "vqc"), manager.variant("head", "fc")])


def test_noise_sweep_at_zero_matches_the_plain_run(write_config, experiment_data, tmp_path):
    manager = _manager(write_config, experiment_data)
    plain = manager.run(tmp_path / "plain")
    rows = manager.sweep("noise", ["0.0"], [7])
    assert rows[0][2] == plain.final.test_accuracy
    assert rows[0][3] == plain.final.test_loss


def test_unknown_sweep_inputs(write_config, experiment_data):
    manager = _manager(write_config, experiment_data)
    with pytest.raises(ConfigurationError):
        manager.variant("depth", "2")
    with pytest.raises(ConfigurationError):
        manager.variant("block", "ttn")
    with pytest.raises(ConfigurationError):
        manager.sweep("qubits", [], [0])


def test_bound_report_is_written_for_vqc_runs(write_config, experiment_data, tmp_path):
    experiment_data["theory"] = {"report": True, "nSamples": 4, "nProbes": 1}
    result = _manager(write_config, experiment_data).run()
    report = json.loads((tmp_path / "runs" / "tiny" / "bound_report.json").read_text())
    assert report["epsOptNoiseBound"] == report["epsOptBound"]
    assert report["T"] == 6
    assert result.report.r_hat == max(r.mean_grad_norm for r in result.history) ** 2
    assert report["rademacherHat"] is not None
    assert report["configHash"] == result.report.source_config_hash == result.config_hash


def _identity_head_sweep(experiment_data: dict, fc: dict) -> dict:
    experiment_data["featureBlock"] = {"kind": "identity"}
    experiment_data["head"] = {"kind": "vqc", "qubits": 4, "depth": 6}
    experiment_data["variants"] = {"heads": [fc]}
    return experiment_data


def test_budget_check_covers_fc_heads_on_identity_blocks(write_config, experiment_data):
    manager = _manager(write_config, _identity_head_sweep(experiment_data, {"kind": "fc", "inputs": 4}))
    configs = [manager.variant("head", "vqc"), manager.variant("head", "fc")]
    assert manager.head_width(configs[1]) == 4
    with pytest.raises(ConfigurationError, match="72"):
        manager.check_budget(configs)


def test_identity_block_width_falls_back_to_the_generator_width(write_config, experiment_data):
    manager = _manager(write_config, _identity_head_sweep(experiment_data, {"kind": "fc"}))
    assert manager.head_width(manager.variant("head", "fc")) == 2500


def test_budget_check_refuses_unresolvable_widths(write_config, experiment_data):
    manager = _manager(write_config, experiment_data)
    fc = manager.variant("head", "fc").model_copy(update={"feature_block": EmbeddingBlockSpec(path="emb.bin")})
    with pytest.raises(ConfigurationError) as excinfo:
        manager.check_budget([manager.variant("head", "vqc"), fc])
    assert excinfo.value.field == "head.inputs"
