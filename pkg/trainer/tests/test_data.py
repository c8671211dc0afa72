import numpy as np
import pytest

from navtrainer.data import (
    load_all_labels,
    load_arrays,
    load_manifest,
    load_split,
    standardization_probe,
)


def test_manifest_fields(synthetic_dataset):
    m = load_manifest(synthetic_dataset)
    assert m.scenario == 1
    assert m.components == ("at_pos", "ct_pos")
    assert m.m == 2
    assert m.counts == {"train": 24, "val": 8, "test": 8}
    assert np.all(m.label_std > 0)


def test_load_arrays_shapes(synthetic_dataset):
    manifest = load_manifest(synthetic_dataset)
    inputs, labels = load_arrays(synthetic_dataset, manifest, "train")
    assert inputs.shape == (24, 3, 16, 16)
    assert labels.shape == (24, 2)
    assert inputs.dtype == np.float32


def test_load_split_tensors(synthetic_dataset):
    manifest = load_manifest(synthetic_dataset)
    ds = load_split(synthetic_dataset, manifest, "val")
    assert len(ds) == 8
    xb, yb = ds[0]
    assert tuple(xb.shape) == (3, 16, 16)
    assert tuple(yb.shape) == (2,)


def test_tensor_size_mismatch_detected(synthetic_dataset):
    manifest = load_manifest(synthetic_dataset)
    path = synthetic_dataset / manifest.files["test"]["inputs"]
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="do not match"):
        load_arrays(synthetic_dataset, manifest, "test")


def test_format_version_guard(synthetic_dataset):
    text = (synthetic_dataset / "manifest.json").read_text()
    (synthetic_dataset / "manifest.json").write_text(text.replace(
        '"format_version": 1', '"format_version": 99'
    ))
    with pytest.raises(ValueError, match="format_version"):
        load_manifest(synthetic_dataset)


def test_standardizing_set_zero_predictor_unity(synthetic_dataset):
    manifest = load_manifest(synthetic_dataset)
    labels = load_all_labels(synthetic_dataset, manifest).astype(np.float64)
    mse = (labels**2).mean(axis=0)
    np.testing.assert_allclose(mse, 1.0, atol=1e-6)


def test_standardization_probe(synthetic_dataset):
    manifest = load_manifest(synthetic_dataset)
    inputs, _ = load_arrays(synthetic_dataset, manifest, "train")
    standardization_probe(inputs)
    with pytest.raises(AssertionError):
        standardization_probe(inputs + 0.5)
    # all-zero channel (the degenerate zero-error difference) is accepted
    degenerate = inputs.copy()
    degenerate[0, 2] = 0.0
    standardization_probe(degenerate)
