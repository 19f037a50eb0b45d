import json

from typer.testing import CliRunner

from lego_qml.cli import app
from lego_qml.core import vqc

runner = CliRunner()


def test_train_writes_artifacts(write_config, experiment_data, tmp_path):
    config = write_config(experiment_data)
    result = runner.invoke(app, ["train", "--config", str(config), "--jobs", "1"])
    assert result.exit_code == 0, result.output
    assert "Run Summary" in result.output
    assert (tmp_path / "runs" / "tiny" / "metrics.csv").exists()


def test_train_with_out_and_seed_overrides(write_config, experiment_data, tmp_path):
    config = write_config(experiment_data)
    out = tmp_path / "elsewhere"
    result = runner.invoke(app, ["train", "-c", str(config), "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    header = (out / "tiny" / "metrics.csv").read_text().splitlines()[0]
    assert header.endswith("seed=3")


def test_missing_head_exits_with_configuration_code(write_config, experiment_data):
    del experiment_data["head"]
    result = runner.invoke(app, ["train", "--config", str(write_config(experiment_data))])
    assert result.exit_code == 2
    assert "head" in result.output


def test_missing_config_file(tmp_path):
    result = runner.invoke(app, ["train", "--config", str(tmp_path / "nope.json")])
    assert result.exit_code == 2


def test_tampered_pca_checkpoint_exits_with_invariant_code(write_config, experiment_data, tmp_path):
    config = write_config(experiment_data)
    result = runner.invoke(app, ["fit-pca", str(tmp_path / "pca.json"), "--config", str(config)])
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "pca.json").read_text())
    data["components"][0][0] += 0.5
    (tmp_path / "pca.json").write_text(json.dumps(data))
    experiment_data["featureBlock"]["checkpoint"] = "pca.json"
    result = runner.invoke(app, ["train", "--config", str(write_config(experiment_data))])
    assert result.exit_code == 3


def test_eval_reports_test_metrics(write_config, experiment_data, tmp_path):
    config = write_config(experiment_data)
    assert runner.invoke(app, ["train", "--config", str(config)]).exit_code == 0
    model = tmp_path / "runs" / "tiny" / "model.json"
    result = runner.invoke(app, ["eval", str(model), "--config", str(config), "--out", str(tmp_path / "e.json")])
    assert result.exit_code == 0, result.output
    assert "Test accuracy" in result.output
    assert "testLoss" in json.loads((tmp_path / "e.json").read_text())


def test_gen_data_writes_csv(write_config, experiment_data, tmp_path):
    out = tmp_path / "data.csv"
    result = runner.invoke(app, ["gen-data", str(out), "--config", str(write_config(experiment_data))])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert len(lines) == 2 + 40


def test_sweep_rejects_unknown_axis_and_bad_seeds(write_config, experiment_data):
    config = str(write_config(experiment_data))
    assert runner.invoke(app, ["sweep", "depth", "1,2", "--config", config]).exit_code == 2
    assert runner.invoke(app, ["sweep", "qubits", "2", "--seeds", "a,b", "--config", config]).exit_code == 2


def test_sweep_over_heads(write_config, experiment_data, tmp_path):
    result = runner.invoke(app, ["sweep", "head", "vqc,fc", "--seeds", "0", "--config",
                                 str(write_config(experiment_data))])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "runs" / "tiny" / "sweep-head" / "sweep_head.csv").exists()


def test_check_gradients_passes():
    result = runner.invoke(app, ["check", "gradients"])
    assert result.exit_code == 0, result.output
    assert "All hard properties passed" in result.output


def test_check_names_the_failing_property(monkeypatch):
    monkeypatch.setattr(vqc, "SHIFT_COEFFICIENT", 0.45)
    result = runner.invoke(app, ["check", "gradients"])
    assert result.exit_code == 1
    assert "gradients/parameter-shift agreement" in result.output


def test_init_copies_default_configs(tmp_path):
    result = runner.invoke(app, ["init", "--target", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "configs" / "qdot-pca-vqc.json").exists()
