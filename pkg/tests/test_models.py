import pytest
import yaml
from pydantic import ValidationError

from lego_qml.models import (
    AnsatzSpec,
    EvalMode,
    ExperimentConfig,
    FcHeadSpec,
    NoiseModel,
    TrainConfig,
    TtnBlockSpec,
    VqcHeadSpec,
)


def test_aliases_and_field_names_are_both_accepted():
    assert NoiseModel(tauMeas=0.5).tau_meas == 0.5
    assert NoiseModel(tau_meas=0.5).tau_meas == 0.5
    dumped = NoiseModel(p_depol_1q=0.1).model_dump(by_alias=True)
    assert dumped["pDepol1q"] == 0.1


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        NoiseModel.model_validate({"pDepol": 0.1})


def test_probabilities_must_stay_below_one():
    with pytest.raises(ValidationError):
        NoiseModel(p_depol_1q=1.0)


@pytest.mark.parametrize("q", [0.7, 1.0])
def test_readout_flip_probability_is_capped_at_one_half(q):
    with pytest.raises(ValidationError):
        NoiseModel(p_readout_flip=q)
    assert NoiseModel(p_readout_flip=0.5).p_readout_flip == 0.5


def test_shots_mode_requires_shot_count():
    with pytest.raises(ValidationError):
        EvalMode(kind="shots")
    assert EvalMode.with_shots(100).shots == 100


def test_measured_qubits_cannot_exceed_register():
    with pytest.raises(ValidationError):
        AnsatzSpec(num_qubits=2, measure_qubits=3)
    with pytest.raises(ValidationError):
        AnsatzSpec(num_qubits=25)


def test_ttn_spec_lengths():
    assert TtnBlockSpec(input_factors=[2, 3], output_factors=[2, 2], ranks=[4]).components == 4
    with pytest.raises(ValidationError):
        TtnBlockSpec(input_factors=[2, 3], output_factors=[2], ranks=[4])


def test_head_parameter_counts():
    assert VqcHeadSpec(qubits=4, depth=1).param_count(2) == 12
    assert FcHeadSpec().param_count(2, 4) == 10


def test_learning_rate_accepts_float_or_schedule():
    assert TrainConfig(lr=0.01).lr == 0.01
    config = TrainConfig.model_validate({"lr": {"kind": "theorem3", "R": 1, "L": 1, "betaSmooth": 1}})
    assert config.lr.r_bound == 1.0
    with pytest.raises(ValidationError):
        TrainConfig(lr=-0.1)


def _experiment(**overrides) -> dict:
    data = {
        "runName": "t",
        "dataset": {"source": {"generator": "tfbs", "n": 10}},
        "featureBlock": {"kind": "pca", "components": 2},
        "head": {"kind": "vqc", "qubits": 2},
    }
    data.update(overrides)
    return data


def test_experiment_config_hash_is_stable_and_sensitive():
    first = ExperimentConfig.model_validate(_experiment())
    second = ExperimentConfig.model_validate(_experiment())
    assert first.config_hash() == second.config_hash()
    assert len(first.config_hash()) == 16
    assert ExperimentConfig.model_validate(_experiment(seed=1)).config_hash() != first.config_hash()


def test_too_many_classes_need_projection_readout():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(_experiment(training={"numClasses": 3}))
    config = ExperimentConfig.model_validate(_experiment(training={"numClasses": 3, "readout": "projection"}))
    assert config.training.num_classes == 3


def test_effective_noise():
    assert ExperimentConfig.model_validate(_experiment()).effective_noise is None
    noisy = ExperimentConfig.model_validate(_experiment(noise={"tauMeas": 0.1}))
    assert noisy.effective_noise.tau_meas == 0.1


def test_yaml_config_files_load(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(_experiment()))
    config = ExperimentConfig.from_file(path)
    assert config.run_name == "t" and config.training_seed == 0


def test_json_file_round_trip(tmp_path):
    config = ExperimentConfig.model_validate(_experiment(seed=5))
    config.to_json_file(tmp_path / "c.json")
    assert ExperimentConfig.from_json_file(tmp_path / "c.json").config_hash() == config.config_hash()
