import numpy as np
import pytest

from lego_qml.errors import DataError, RangeError, ShapeError
from lego_qml.core.encoding import encode_tpe, fit_normalizer, phi, product_amplitudes
from lego_qml.core.statevector import apply_circuit, expectation_z_all, init_zero, ry
from lego_qml.utils import task_rng


def test_tpe_matches_ry_circuit():
    values = np.array([0.3, -0.7, 1.0])
    circuit = [ry(u, np.pi / 2 * v) for u, v in enumerate(values)]
    expected = apply_circuit(init_zero(3), circuit)
    np.testing.assert_allclose(encode_tpe(values).amplitudes, expected.amplitudes, atol=1e-12)


def test_tpe_expectations_are_cosines():
    values = np.array([0.0, 0.5, -1.0])
    np.testing.assert_allclose(expectation_z_all(encode_tpe(values)), np.cos(np.pi / 2 * values), atol=1e-12)


def test_tpe_rejects_out_of_range_inputs():
    with pytest.raises(RangeError):
        encode_tpe(np.array([0.2, 1.5]))
    with pytest.raises(RangeError):
        product_amplitudes(np.array([[np.nan]]))


def test_batch_amplitudes_match_single_encodings(rng):
    batch = rng.uniform(-1, 1, size=(5, 4))
    amps = product_amplitudes(batch)
    for row, values in zip(amps, batch):
        np.testing.assert_allclose(row, encode_tpe(values).amplitudes, atol=1e-12)


def test_tanh_normalizer_maps_into_unit_interval():
    raw = task_rng(1).normal(5.0, 3.0, size=(200, 4))
    spec = fit_normalizer(raw)
    values = phi(spec, raw)
    assert np.all(np.abs(values) <= 1.0)
    np.testing.assert_allclose(values.mean(axis=0), 0.0, atol=0.1)
    assert not spec.mean.flags.writeable


def test_constant_column_is_floored_not_divided_by_zero():
    raw = np.column_stack([np.ones(10), np.arange(10.0)])
    values = phi(fit_normalizer(raw), raw)
    assert np.all(np.isfinite(values))
    np.testing.assert_allclose(values[:, 0], 0.0)


def test_minmax_normalizer_clips_unseen_values():
    raw = np.array([[0.0], [2.0], [4.0]])
    spec = fit_normalizer(raw, "minmax")
    np.testing.assert_allclose(phi(spec, raw)[:, 0], [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(phi(spec, np.array([[10.0]])), [[1.0]])


def test_normalizer_state_round_trip_preserves_phi():
    raw = task_rng(2).normal(size=(30, 3))
    spec = fit_normalizer(raw, "minmax")
    restored = type(spec).from_state(spec.to_state())
    np.testing.assert_array_equal(phi(restored, raw), phi(spec, raw))


def test_normalizer_errors():
    with pytest.raises(DataError):
        fit_normalizer(np.ones((1, 3)))
    spec = fit_normalizer(np.ones((4, 3)))
    with pytest.raises(ShapeError):
        phi(spec, np.ones((2, 2)))
