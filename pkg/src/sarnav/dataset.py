"""Scenario-constrained error sampling, preprocessing, splits, and dataset builds.

A dataset directory holds manifest.json plus {train,val,test}_inputs.f32 and
{train,val,test}_labels.f32. Tensor files are row-major little-endian
float32; inputs are N x 3 x n_at x n_ct (distorted, reference, difference
channels, each log-transformed and per-image standardized), labels are
N x m standardized error components. This layout is the contract consumed
by downstream training code.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .nav import NavError, corrupt_trajectory
from .sim import TargetScene, backproject, simulate_phase_history

FORMAT_VERSION = 1
LOG_FLOOR = 1e-12       # added to magnitudes before log10
DIFF_STD_FLOOR = 1e-6   # std guard for the legitimately-constant difference channel
SPLITS = ("train", "val", "test")

COMPONENTS = ("at_pos", "ct_pos", "d_pos", "at_vel", "ct_vel", "d_vel")

# Active error components for each of the six sampling scenarios.
SCENARIO_TABLE = {
    1: ("at_pos", "ct_pos"),
    2: ("at_vel", "ct_vel"),
    3: ("at_pos", "ct_pos", "at_vel", "ct_vel"),
    4: ("at_pos", "ct_pos", "d_pos"),
    5: ("at_vel", "ct_vel", "d_vel"),
    6: ("at_pos", "ct_pos", "d_pos", "at_vel", "ct_vel", "d_vel"),
}


class DegenerateImageError(ValueError):
    """Image (or channel) is constant where variation is required."""


@dataclass(frozen=True)
class Scenario:
    """One row of the scenario table: which error components are active."""

    id: int
    active: tuple

    def __post_init__(self):
        if self.id not in SCENARIO_TABLE:
            raise ValueError(f"scenario id must be in 1..6, got {self.id}")
        if tuple(self.active) != SCENARIO_TABLE[self.id]:
            raise ValueError(
                f"scenario {self.id} active components must be "
                f"{SCENARIO_TABLE[self.id]}, got {tuple(self.active)}"
            )

    @classmethod
    def by_id(cls, scenario_id: int) -> "Scenario":
        if scenario_id not in SCENARIO_TABLE:
            raise ValueError(f"scenario id must be in 1..6, got {scenario_id}")
        return cls(scenario_id, SCENARIO_TABLE[scenario_id])

    @property
    def n_components(self) -> int:
        return len(self.active)


def default_scales(position_std: float = 1.5, velocity_std: float = 0.2) -> dict:
    scales = {}
    for comp in COMPONENTS:
        scales[comp] = position_std if comp.endswith("_pos") else velocity_std
    return scales


def sample_errors(scenario: Scenario, seed, scales: dict | None = None) -> NavError:
    """Draw one NavError: active components i.i.d. zero-mean Gaussian.

    Inactive components are exactly zero. Deterministic given the seed
    (an int or a numpy SeedSequence).
    """
    if scales is None:
        scales = default_scales()
    for comp in scenario.active:
        if not scales.get(comp, 0.0) > 0.0:
            raise ValueError(f"scale for active component {comp} must be positive")
    rng = np.random.default_rng(seed)
    vec = np.zeros(9)
    for comp in scenario.active:
        vec[COMPONENTS.index(comp)] = rng.normal(0.0, scales[comp])
    return NavError.from_vector(vec)


def error_components(err: NavError, scenario: Scenario) -> np.ndarray:
    full = err.as_vector()[:6]
    return np.array([full[COMPONENTS.index(c)] for c in scenario.active])


def _standardize(arr: np.ndarray, std_floor: float | None = None) -> np.ndarray:
    mu = arr.mean()
    sigma = arr.std()
    if std_floor is not None:
        sigma = max(sigma, std_floor)
    elif sigma == 0.0:
        raise DegenerateImageError("constant image cannot be standardized")
    return (arr - mu) / sigma


def preprocess_image(mag: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    """Log-transform then standardize one magnitude image.

    Z = (log10(mag + floor) - mean) / std with per-image population
    statistics. Raises DegenerateImageError on constant images.
    """
    mag = np.asarray(mag, dtype=float)
    if mag.size == 0:
        raise ValueError("empty image")
    if np.any(mag + floor <= 0.0):
        raise ValueError("magnitudes must be positive after the noise-floor offset")
    return _standardize(np.log10(mag + floor))


def make_input_tensor(dist_mag: np.ndarray, ref_mag: np.ndarray,
                      floor: float = LOG_FLOOR) -> np.ndarray:
    """Stack the 3-channel network input: distorted, reference, difference.

    The difference channel is re-standardized with a std floor so the
    zero-error pair (identically zero difference) stays representable.
    """
    ch_dist = preprocess_image(dist_mag, floor)
    ch_ref = preprocess_image(ref_mag, floor)
    ch_diff = _standardize(ch_dist - ch_ref, std_floor=DIFF_STD_FLOOR)
    return np.stack([ch_dist, ch_ref, ch_diff]).astype(np.float32)


@dataclass(frozen=True)
class SampleRecord:
    """One rendered sample: 3-channel input stack, standardized label, provenance."""

    input: np.ndarray   # (3, n_at, n_ct) float32, per-channel standardized
    label: np.ndarray   # (m,) standardized error components
    target_id: int
    raw_error: NavError

    def __post_init__(self):
        inp = np.asarray(self.input, dtype=np.float32)
        lab = np.asarray(self.label, dtype=float)
        if inp.ndim != 3 or inp.shape[0] != 3:
            raise ValueError(f"input must be (3, n_at, n_ct), got {inp.shape}")
        if lab.ndim != 1 or lab.size == 0:
            raise ValueError("label must be a non-empty vector")
        means = inp.mean(axis=(1, 2))
        stds = inp.std(axis=(1, 2))
        if np.abs(means).max() > 1e-3:
            raise ValueError(f"channel means must be 0 within 1e-3, got {means}")
        # the difference channel of an exactly-zero-error pair is all zeros
        ok = (np.abs(stds - 1.0) <= 1e-3) | (stds <= 1e-5)
        if not np.all(ok):
            raise ValueError(f"channel stds must be 1 within 1e-3, got {stds}")
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "label", lab)


def standardize_labels(
    errors,
    scenario: Scenario,
    mean_override=None,
    std_override=None,
):
    """Standardize raw error components over the whole dataset.

    Returns (labels, mu_y, sigma_y) where sigma_y is the population std.
    Overrides support the operational mode where the constants come from a
    navigation filter instead of dataset statistics.
    """
    if len(errors) and isinstance(errors[0], NavError):
        y = np.array([error_components(e, scenario) for e in errors])
    else:
        y = np.asarray(errors, dtype=float)
    if y.ndim != 2 or y.shape[1] != scenario.n_components:
        raise ValueError(
            f"expected shape (N, {scenario.n_components}), got {y.shape}"
        )
    if y.shape[0] < 2:
        raise ValueError("need at least 2 samples to standardize labels")
    mu = y.mean(axis=0) if mean_override is None else np.asarray(mean_override, dtype=float)
    sigma = y.std(axis=0) if std_override is None else np.asarray(std_override, dtype=float)
    if np.any(sigma <= 0.0):
        bad = scenario.active[int(np.argmin(sigma))]
        raise ValueError(f"label component {bad} has non-positive std")
    return (y - mu) / sigma, mu, sigma


def split_by_target(target_ids, ratios=(0.7, 0.1, 0.2), seed=0):
    """Partition target ids into train/val/test sets at target granularity.

    Sizes follow largest-remainder apportionment of n * ratio (ties broken
    toward the later split), so every split is within one target of its
    exact share.
    """
    ids = sorted(set(target_ids))
    n = len(ids)
    if n < 3:
        raise ValueError(f"need at least 3 targets to split, got {n}")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    quotas = [n * r for r in ratios]
    sizes = [int(np.floor(q)) for q in quotas]
    order = sorted(range(3), key=lambda i: (quotas[i] - sizes[i], i), reverse=True)
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in perm]
    return (
        set(shuffled[: sizes[0]]),
        set(shuffled[sizes[0] : sizes[0] + sizes[1]]),
        set(shuffled[sizes[0] + sizes[1] :]),
    )


def mse_metric(s_true: np.ndarray, s_hat: np.ndarray):
    """Per-component and average mean squared error over standardized labels."""
    s_true = np.asarray(s_true, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if s_true.shape != s_hat.shape or s_true.ndim != 2:
        raise ValueError(f"shape mismatch: {s_true.shape} vs {s_hat.shape}")
    sq = (s_true - s_hat) ** 2
    return sq.mean(axis=0), float(sq.mean())


@dataclass(frozen=True)
class DatasetManifest:
    """Dataset directory metadata: scenario, standardization constants, layout."""

    scenario: int
    components: tuple
    aperture_s: float
    seed: int
    counts: dict
    label_mean: np.ndarray
    label_std: np.ndarray
    files: dict
    target_ids: dict
    config: dict
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        mu = np.asarray(self.label_mean, dtype=float)
        sigma = np.asarray(self.label_std, dtype=float)
        if mu.shape != (len(self.components),) or sigma.shape != mu.shape:
            raise ValueError("label constants must match the component count")
        if np.any(sigma <= 0.0):
            raise ValueError("label_std must be strictly positive")
        object.__setattr__(self, "label_mean", mu)
        object.__setattr__(self, "label_std", sigma)
        for split in SPLITS:
            expected = tuple(self.files[split]["input_shape"])
            if expected[0] != self.counts[split]:
                raise ValueError(f"{split} count inconsistent with tensor shape")

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "scenario": self.scenario,
            "components": list(self.components),
            "aperture_s": self.aperture_s,
            "seed": self.seed,
            "counts": self.counts,
            "label_mean": list(self.label_mean),
            "label_std": list(self.label_std),
            "files": self.files,
            "target_ids": self.target_ids,
            "config": self.config,
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format_version {doc.get('format_version')}")
        return cls(
            scenario=int(doc["scenario"]),
            components=tuple(doc["components"]),
            aperture_s=float(doc["aperture_s"]),
            seed=int(doc["seed"]),
            counts={k: int(v) for k, v in doc["counts"].items()},
            label_mean=np.asarray(doc["label_mean"], dtype=float),
            label_std=np.asarray(doc["label_std"], dtype=float),
            files=doc["files"],
            target_ids={k: list(v) for k, v in doc["target_ids"].items()},
            config=doc["config"],
        )


def load_manifest(dataset_dir) -> DatasetManifest:
    with open(os.path.join(dataset_dir, "manifest.json")) as f:
        return DatasetManifest.from_json(f.read())


def load_split(dataset_dir, manifest: DatasetManifest, split: str):
    """Read one split's (inputs, labels) float32 tensors."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    entry = manifest.files[split]
    inputs = np.fromfile(
        os.path.join(dataset_dir, entry["inputs"]), dtype="<f4"
    ).reshape(entry["input_shape"])
    labels = np.fromfile(
        os.path.join(dataset_dir, entry["labels"]), dtype="<f4"
    ).reshape(entry["label_shape"])
    return inputs, labels


# --- deterministic per-sample seeding ---------------------------------------

_TARGET_STREAM = 101
_SPLIT_STREAM = 137
_ERROR_STREAM = 211


def _target_positions(config: RunConfig) -> np.ndarray:
    s = config.sampling
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _TARGET_STREAM]))
    offsets = rng.uniform(-s.target_region, s.target_region, size=(s.n_targets, 2))
    center = config.scene_center()
    pos = np.tile(center, (s.n_targets, 1))
    pos[:, 0] += offsets[:, 0]
    pos[:, 1] += offsets[:, 1]
    return pos


def sample_all_errors(config: RunConfig) -> list[list[NavError]]:
    """Every sample's injected error, indexed [target][pair]; pure function of config."""
    scenario = Scenario.by_id(config.scenario)
    scales = default_scales(config.sampling.position_std, config.sampling.velocity_std)
    out = []
    for i in range(config.sampling.n_targets):
        row = []
        for j in range(config.sampling.pairs_per_target):
            seed = np.random.SeedSequence([config.seed, _ERROR_STREAM, i, j])
            row.append(sample_errors(scenario, seed, scales))
        out.append(row)
    return out


def build_dataset(config: RunConfig, out_dir) -> DatasetManifest:
    """Render image pairs per sample and persist the ML-ready dataset.

    Deterministic function of (config, seed): rebuilding with the same
    config produces byte-identical files. Within a target, every pair
    reuses one simulated phase history and one reference image.
    """
    config.validate()
    scenario = Scenario.by_id(config.scenario)
    s = config.sampling
    truth = config.make_trajectory()
    grid = config.make_grid()
    targets = _target_positions(config)
    params = config.make_radar_params(truth, targets)

    errors = sample_all_errors(config)
    flat_errors = [e for row in errors for e in row]
    labels, mu_y, sigma_y = standardize_labels(flat_errors, scenario)
    labels = labels.reshape(s.n_targets, s.pairs_per_target, scenario.n_components)

    train_ids, val_ids, test_ids = split_by_target(
        range(s.n_targets), s.split_ratios,
        seed=np.random.SeedSequence([config.seed, _SPLIT_STREAM]),
    )
    membership = {}
    for split, ids in (("train", train_ids), ("val", val_ids), ("test", test_ids)):
        for tid in ids:
            membership[tid] = split

    buckets = {split: {"inputs": [], "labels": [], "targets": []} for split in SPLITS}
    for i in range(s.n_targets):
        scene = TargetScene(targets[i : i + 1], np.array([1.0]))
        ph = simulate_phase_history(
            truth, scene, params, workers=config.workers,
            noise_std=config.radar.noise_std, noise_seed=config.seed + i,
        )
        ref = backproject(ph, truth, grid, params, workers=config.workers)
        ref_mag = ref.magnitude
        split = membership[i]
        for j in range(s.pairs_per_target):
            est = corrupt_trajectory(truth, errors[i][j])
            dist = backproject(ph, est, grid, params, workers=config.workers)
            try:
                record = SampleRecord(
                    make_input_tensor(dist.magnitude, ref_mag),
                    labels[i, j], i, errors[i][j],
                )
            except (DegenerateImageError, ValueError) as exc:
                raise RuntimeError(
                    f"failed to preprocess sample target={i} pair={j}: {exc}"
                ) from exc
            buckets[split]["inputs"].append(record.input)
            buckets[split]["labels"].append(record.label)
            buckets[split]["targets"].append(record.target_id)

    os.makedirs(out_dir, exist_ok=True)
    files = {}
    counts = {}
    target_ids = {}
    m = scenario.n_components
    for split in SPLITS:
        inp = np.asarray(buckets[split]["inputs"], dtype="<f4")
        lab = np.asarray(buckets[split]["labels"], dtype="<f4")
        if inp.size == 0:
            inp = inp.reshape(0, 3, grid.n_at, grid.n_ct)
            lab = lab.reshape(0, m)
        counts[split] = int(inp.shape[0])
        files[split] = {
            "inputs": f"{split}_inputs.f32",
            "labels": f"{split}_labels.f32",
            "input_shape": list(inp.shape),
            "label_shape": list(lab.shape),
        }
        target_ids[split] = sorted({int(t) for t in buckets[split]["targets"]})
        inp.tofile(os.path.join(out_dir, files[split]["inputs"]))
        lab.tofile(os.path.join(out_dir, files[split]["labels"]))

    # out/workers are invocation details, not dataset content; keeping them
    # out of the manifest preserves byte-identical rebuilds anywhere
    config_doc = config.to_dict()
    config_doc.pop("out", None)
    config_doc.pop("workers", None)
    manifest = DatasetManifest(
        scenario=scenario.id,
        components=scenario.active,
        aperture_s=config.geometry.aperture_s,
        seed=config.seed,
        counts=counts,
        label_mean=mu_y,
        label_std=sigma_y,
        files=files,
        target_ids=target_ids,
        config=config_doc,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        f.write(manifest.to_json())
        f.write("\n")
    return manifest
