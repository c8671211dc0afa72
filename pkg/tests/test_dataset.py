import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarnav.config import config_from_dict
from sarnav.dataset import (
    COMPONENTS,
    SCENARIO_TABLE,
    DegenerateImageError,
    Scenario,
    build_dataset,
    default_scales,
    error_components,
    load_manifest,
    load_split,
    make_input_tensor,
    mse_metric,
    preprocess_image,
    sample_all_errors,
    sample_errors,
    split_by_target,
    standardize_labels,
)


# --- scenarios ---------------------------------------------------------------

def test_scenario_table_marks():
    assert SCENARIO_TABLE[1] == ("at_pos", "ct_pos")
    assert SCENARIO_TABLE[2] == ("at_vel", "ct_vel")
    assert SCENARIO_TABLE[3] == ("at_pos", "ct_pos", "at_vel", "ct_vel")
    assert SCENARIO_TABLE[4] == ("at_pos", "ct_pos", "d_pos")
    assert SCENARIO_TABLE[5] == ("at_vel", "ct_vel", "d_vel")
    assert SCENARIO_TABLE[6] == COMPONENTS
    assert set(SCENARIO_TABLE) == set(range(1, 7))


def test_scenario_by_id_and_validation():
    s = Scenario.by_id(4)
    assert s.n_components == 3
    with pytest.raises(ValueError):
        Scenario.by_id(7)
    with pytest.raises(ValueError):
        Scenario(1, ("at_pos",))


# --- sample_errors -----------------------------------------------------------

def test_sample_errors_scenario1_inactive_zero():
    s = Scenario.by_id(1)
    for seed in range(20):
        err = sample_errors(s, seed)
        assert err.dp_n[2] == 0.0
        assert np.array_equal(err.dv_n, np.zeros(3))
        assert np.array_equal(err.dtheta_n, np.zeros(3))


def test_sample_errors_deterministic():
    s = Scenario.by_id(6)
    a = sample_errors(s, 123).as_vector()
    b = sample_errors(s, 123).as_vector()
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_errors(s, 124).as_vector())


def test_sample_errors_statistics():
    s = Scenario.by_id(6)
    scales = default_scales()
    draws = np.array([error_components(sample_errors(s, i), s) for i in range(10_000)])
    stds = draws.std(axis=0)
    expected = np.array([scales[c] for c in s.active])
    np.testing.assert_allclose(stds, expected, rtol=0.05)
    np.testing.assert_allclose(draws.mean(axis=0), np.zeros(6), atol=0.05)


def test_sample_errors_requires_positive_scale():
    with pytest.raises(ValueError, match="scale"):
        sample_errors(Scenario.by_id(1), 0, {"at_pos": 0.0, "ct_pos": 1.0})


# --- preprocess --------------------------------------------------------------

def test_preprocess_hand_example():
    # log10({1,10,100}) = {0,1,2}; mean 1, population std sqrt(2/3)
    z = preprocess_image(np.array([[1.0, 10.0, 100.0]]), floor=0.0)
    np.testing.assert_allclose(z, [[-1.224744871, 0.0, 1.224744871]], atol=1e-9)


def test_preprocess_constant_image_errors():
    with pytest.raises(DegenerateImageError):
        preprocess_image(np.full((4, 4), 100.0), floor=0.0)


def test_preprocess_standardizes():
    rng = np.random.default_rng(1)
    img = rng.random((32, 32)) + 0.1
    z = preprocess_image(img)
    assert abs(z.mean()) < 1e-9
    assert abs(z.std() - 1.0) < 1e-9


def test_make_input_tensor_channels(desk):
    ref = desk["reference"].magnitude
    dist = np.roll(ref, 3, axis=1)
    t = make_input_tensor(dist, ref)
    assert t.shape == (3, 80, 80)
    assert t.dtype == np.float32
    for ch in range(3):
        assert abs(t[ch].mean()) < 1e-3
        assert abs(t[ch].std() - 1.0) < 1e-3
    np.testing.assert_allclose(t[0], preprocess_image(dist).astype(np.float32), atol=1e-6)


def test_make_input_tensor_zero_error_pair(desk):
    ref = desk["reference"].magnitude
    t = make_input_tensor(ref, ref)
    # identical pair: difference channel is all zeros via the std floor
    assert np.array_equal(t[2], np.zeros_like(t[2]))
    assert abs(t[0].std() - 1.0) < 1e-3


def test_sample_record_invariants(desk):
    from sarnav import NavError
    from sarnav.dataset import SampleRecord

    ref = desk["reference"].magnitude
    tensor = make_input_tensor(np.roll(ref, 2, axis=0), ref)
    rec = SampleRecord(tensor, np.array([0.5, -0.5]), 3, NavError.zero())
    assert rec.target_id == 3
    with pytest.raises(ValueError, match="means"):
        SampleRecord(tensor + 0.1, np.array([0.5, -0.5]), 3, NavError.zero())
    # zero-error pair (constant difference channel) is representable
    SampleRecord(make_input_tensor(ref, ref), np.zeros(2), 0, NavError.zero())


# --- labels ------------------------------------------------------------------

def test_standardize_labels_constants():
    s = Scenario.by_id(1)
    rng = np.random.default_rng(2)
    y = rng.normal(0, [1.5, 1.5], size=(500, 2))
    labels, mu, sigma = standardize_labels(y, s)
    np.testing.assert_allclose(labels.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(labels.std(axis=0), 1.0, atol=1e-9)
    np.testing.assert_allclose(labels * sigma + mu, y, atol=1e-12)


def test_standardize_labels_symmetric_pair():
    labels, mu, sigma = standardize_labels(
        np.array([[-1.0, -1.0], [1.0, 1.0]]), Scenario.by_id(1)
    )
    np.testing.assert_array_equal(labels, [[-1.0, -1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(mu, [0.0, 0.0])
    np.testing.assert_array_equal(sigma, [1.0, 1.0])


def test_standardize_labels_zero_variance_errors():
    with pytest.raises(ValueError, match="std"):
        standardize_labels(np.ones((5, 2)), Scenario.by_id(1))


def test_standardize_labels_overrides():
    y = np.array([[1.0, 2.0], [3.0, 6.0]])
    labels, mu, sigma = standardize_labels(
        y, Scenario.by_id(1), mean_override=[0.0, 0.0], std_override=[2.0, 4.0]
    )
    np.testing.assert_allclose(labels, [[0.5, 0.5], [1.5, 1.5]])


def test_predict_zero_mse_is_one():
    s = Scenario.by_id(6)
    draws = [sample_errors(s, i) for i in range(200)]
    labels, _, _ = standardize_labels(draws, s)
    per_comp, avg = mse_metric(labels, np.zeros_like(labels))
    np.testing.assert_allclose(per_comp, np.ones(6), atol=1e-9)
    assert avg == pytest.approx(1.0, abs=1e-9)


# --- mse_metric --------------------------------------------------------------

def test_mse_metric_exact_prediction():
    s = np.array([[0.3, -0.7], [1.1, 0.2]])
    per_comp, avg = mse_metric(s, s)
    np.testing.assert_array_equal(per_comp, [0.0, 0.0])
    assert avg == 0.0


def test_mse_metric_hand_example():
    per_comp, avg = mse_metric(np.array([[1.0, -1.0]]), np.array([[0.0, 0.0]]))
    np.testing.assert_array_equal(per_comp, [1.0, 1.0])
    assert avg == 1.0


def test_mse_metric_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        mse_metric(np.zeros((3, 2)), np.zeros((2, 3)))


# --- split_by_target ---------------------------------------------------------

def test_split_sizes_192():
    train, val, test = split_by_target(range(192), seed=0)
    assert (len(train), len(val), len(test)) == (134, 19, 39)


def test_split_sizes_10():
    train, val, test = split_by_target(range(10), seed=3)
    assert (len(train), len(val), len(test)) == (7, 1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=3, max_value=300), st.integers(min_value=0, max_value=2**31))
def test_split_partition_property(n, seed):
    ids = range(n)
    train, val, test = split_by_target(ids, seed=seed)
    assert train | val | test == set(ids)
    assert not (train & val or train & test or val & test)
    assert abs(len(train) - 0.7 * n) <= 1
    assert abs(len(val) - 0.1 * n) <= 1
    assert abs(len(test) - 0.2 * n) <= 1


def test_split_deterministic_and_guards():
    a = split_by_target(range(20), seed=9)
    b = split_by_target(range(20), seed=9)
    assert a == b
    with pytest.raises(ValueError, match="at least 3"):
        split_by_target([1, 2])
    with pytest.raises(ValueError, match="ratios"):
        split_by_target(range(10), ratios=(0.5, 0.5, 0.5))


# --- build_dataset -----------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_config():
    return config_from_dict({
        "geometry": {"aperture_s": 1.0, "pulse_rate": 100.0},
        "sampling": {"n_targets": 5, "pairs_per_target": 4},
        "scenario": 1,
        "seed": 17,
    })


@pytest.fixture(scope="module")
def built(tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "tiny"
    manifest = build_dataset(tiny_config, out)
    return tiny_config, out, manifest


def test_build_counts_and_files(built):
    cfg, out, manifest = built
    assert manifest.counts == {"train": 12, "val": 4, "test": 4}
    for split in ("train", "val", "test"):
        inputs, labels = load_split(out, manifest, split)
        assert inputs.shape[1:] == (3, 80, 80)
        assert labels.shape == (manifest.counts[split], 2)
        if manifest.counts[split]:
            assert abs(inputs.mean(axis=(2, 3))).max() < 1e-3
            assert abs(inputs.std(axis=(2, 3)) - 1.0).max() < 1e-3


def test_build_rebuild_is_byte_identical(built, tmp_path):
    cfg, out, _ = built
    again = tmp_path / "again"
    build_dataset(cfg, again)
    for name in sorted(os.listdir(out)):
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_build_no_target_leakage(built):
    _, _, manifest = built
    sets = [set(manifest.target_ids[s]) for s in ("train", "val", "test")]
    assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
    assert sets[0] | sets[1] | sets[2] == set(range(5))


def test_build_labels_destandardize_to_raw_errors(built):
    cfg, out, manifest = built
    errors = sample_all_errors(cfg)
    scenario = Scenario.by_id(cfg.scenario)
    raw = {}
    for i, row in enumerate(errors):
        for e in row:
            raw.setdefault(i, []).append(error_components(e, scenario))
    for split in ("train", "test"):
        _, labels = load_split(out, manifest, split)
        recovered = labels.astype(float) * manifest.label_std + manifest.label_mean
        expected = np.concatenate([raw[i] for i in manifest.target_ids[split]])
        np.testing.assert_allclose(recovered, expected, atol=1e-6)


def test_manifest_roundtrip(built):
    _, out, manifest = built
    loaded = load_manifest(out)
    assert loaded.scenario == manifest.scenario
    assert loaded.counts == manifest.counts
    np.testing.assert_array_equal(loaded.label_std, manifest.label_std)
    assert loaded.files == manifest.files
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["format_version"] == 1
