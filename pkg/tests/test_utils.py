import json

import numpy as np
import pytest

from lego_qml.errors import ConfigurationError
from lego_qml.models import NoiseModel
from lego_qml.utils import (
    THREADS_ENV,
    array_checksum,
    chunked,
    load_config,
    ordered_map,
    parse_int_list,
    resolve_workers,
    task_rng,
)


def test_task_streams_are_reproducible_and_distinct():
    assert task_rng(1, 2).random() == task_rng(1, 2).random()
    assert task_rng(1, 2).random() != task_rng(1, 3).random()
    assert task_rng(1, 2).random() != task_rng(2, 1).random()


def test_checksum_depends_on_content_shape_and_dtype():
    a = np.arange(6.0)
    assert array_checksum(a) == array_checksum(a.copy())
    assert array_checksum(a) != array_checksum(a.reshape(2, 3))
    assert array_checksum(a) != array_checksum(a.astype(np.float32))


def test_worker_count_is_capped_by_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "2")
    assert resolve_workers(8) == 2
    assert resolve_workers(1) == 1
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigurationError):
        resolve_workers(4)


def test_ordered_map_keeps_input_order():
    assert ordered_map(lambda x: x * x, range(10), workers=4) == [x * x for x in range(10)]


def test_chunks_cover_the_range():
    assert chunked(10, 4) == [range(0, 4), range(4, 8), range(8, 10)]


def test_parse_int_list():
    assert parse_int_list("0, 1,2") == [0, 1, 2]
    with pytest.raises(ValueError):
        parse_int_list("a")


def test_load_config_reports_first_invalid_field(tmp_path):
    path = tmp_path / "noise.json"
    path.write_text(json.dumps({"pDepol1q": 2.0}))
    with pytest.raises(ConfigurationError) as excinfo:
        load_config(NoiseModel, path)
    assert excinfo.value.field == "pDepol1q"
    with pytest.raises(ConfigurationError):
        load_config(NoiseModel, tmp_path / "missing.json")
