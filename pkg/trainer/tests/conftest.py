import json
import subprocess
import sys

import numpy as np
import pytest

SPLITS = ("train", "val", "test")


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {outcome}", flush=True)


def write_synthetic_dataset(
    out_dir,
    counts={"train": 24, "val": 8, "test": 8},
    m=2,
    scenario=1,
    hw=(16, 16),
    seed=0,
    zero_labels=False,
    signal=True,
):
    """Materialize a contract-conformant dataset directory from numpy alone.

    When `signal` is set, the labels are linearly encoded into the channel
    images so a regressor has something learnable; labels are standardized
    over the full set, so the zero predictor scores exactly 1.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_total = sum(counts.values())
    raw = np.zeros((n_total, m)) if zero_labels else rng.normal(0, 1.5, size=(n_total, m))
    if zero_labels:
        mu, sigma = np.zeros(m), np.ones(m)
        labels = raw.copy()
    else:
        mu, sigma = raw.mean(axis=0), raw.std(axis=0)
        labels = (raw - mu) / sigma

    h, w = hw
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    basis = [xx / w, yy / h]
    inputs = np.empty((n_total, 3, h, w), dtype=np.float32)
    for n in range(n_total):
        for c in range(3):
            img = rng.normal(0, 1.0, size=hw)
            if signal and not zero_labels:
                for j in range(m):
                    img += labels[n, j] * basis[j % 2] * (c + 1)
            img = (img - img.mean()) / img.std()
            inputs[n, c] = img

    components = ["at_pos", "ct_pos", "d_pos", "at_vel", "ct_vel", "d_vel"][:m]
    files = {}
    start = 0
    for split in SPLITS:
        n = counts[split]
        chunk = inputs[start : start + n]
        lab = labels[start : start + n].astype("<f4")
        files[split] = {
            "inputs": f"{split}_inputs.f32",
            "labels": f"{split}_labels.f32",
            "input_shape": [n, 3, h, w],
            "label_shape": [n, m],
        }
        chunk.astype("<f4").tofile(out_dir / files[split]["inputs"])
        lab.tofile(out_dir / files[split]["labels"])
        start += n
    manifest = {
        "format_version": 1,
        "scenario": scenario,
        "components": components,
        "aperture_s": 2.0,
        "seed": seed,
        "counts": counts,
        "label_mean": list(mu),
        "label_std": list(sigma),
        "files": files,
        "target_ids": {s: [] for s in SPLITS},
        "config": {},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out_dir


@pytest.fixture
def synthetic_dataset(tmp_path):
    return write_synthetic_dataset(tmp_path / "synth")


def build_desk_dataset(out_dir, scenario=1, seed=5, velocity_std=0.2):
    """Build a real desk dataset through the imaging CLI (external interface)."""
    config = {
        "geometry": {"aperture_s": 2.0, "pulse_rate": 200.0},
        "sampling": {
            "n_targets": 10,
            "pairs_per_target": 20,
            "velocity_std": velocity_std,
        },
        "scenario": scenario,
        "seed": seed,
    }
    cfg_path = out_dir.parent / f"config_s{scenario}.json"
    cfg_path.write_text(json.dumps(config))
    subprocess.run(
        [sys.executable, "-m", "sarnav.cli", "build",
         "--config", str(cfg_path), "--out", str(out_dir)],
        check=True,
        capture_output=True,
    )
    return out_dir


@pytest.fixture(scope="session")
def desk_scenario1(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk") / "scen1"
    return build_desk_dataset(out, scenario=1)


@pytest.fixture(scope="session")
def desk_scenario6(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk") / "scen6"
    return build_desk_dataset(out, scenario=6, velocity_std=0.05)
