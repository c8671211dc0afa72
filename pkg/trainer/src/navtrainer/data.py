"""Dataset-directory loading: manifest.json plus little-endian float32 tensors.

The directory contract comes from the dataset builder: inputs are
N x 3 x H x W standardized channels, labels are N x m standardized error
components, and manifest.json carries counts, shapes, and the label
standardization constants. This loader adds no normalization of its own.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch.utils.data import TensorDataset

FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Manifest:
    scenario: int
    components: tuple
    counts: dict
    label_mean: np.ndarray
    label_std: np.ndarray
    files: dict
    aperture_s: float
    seed: int

    @property
    def m(self) -> int:
        return len(self.components)


def load_manifest(dataset_dir) -> Manifest:
    path = os.path.join(dataset_dir, "manifest.json")
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported dataset format_version {doc.get('format_version')} in {path}"
        )
    return Manifest(
        scenario=int(doc["scenario"]),
        components=tuple(doc["components"]),
        counts={k: int(v) for k, v in doc["counts"].items()},
        label_mean=np.asarray(doc["label_mean"], dtype=np.float64),
        label_std=np.asarray(doc["label_std"], dtype=np.float64),
        files=doc["files"],
        aperture_s=float(doc["aperture_s"]),
        seed=int(doc["seed"]),
    )


def load_arrays(dataset_dir, manifest: Manifest, split: str):
    """One split's (inputs, labels) as float32 arrays, shape-checked."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    entry = manifest.files[split]
    inputs = np.fromfile(os.path.join(dataset_dir, entry["inputs"]), dtype="<f4")
    labels = np.fromfile(os.path.join(dataset_dir, entry["labels"]), dtype="<f4")
    in_shape = tuple(entry["input_shape"])
    lab_shape = tuple(entry["label_shape"])
    if inputs.size != int(np.prod(in_shape)) or labels.size != int(np.prod(lab_shape)):
        raise ValueError(
            f"tensor file sizes do not match the manifest shapes for split {split!r}"
        )
    inputs = inputs.reshape(in_shape)
    labels = labels.reshape(lab_shape)
    if labels.shape != (in_shape[0], manifest.m):
        raise ValueError("label tensor does not match the manifest component count")
    return inputs, labels


def load_split(dataset_dir, manifest: Manifest, split: str) -> TensorDataset:
    inputs, labels = load_arrays(dataset_dir, manifest, split)
    return TensorDataset(torch.from_numpy(inputs.copy()), torch.from_numpy(labels.copy()))


def load_all_labels(dataset_dir, manifest: Manifest) -> np.ndarray:
    """Labels over the entire dataset (the standardizing set)."""
    parts = [load_arrays(dataset_dir, manifest, s)[1] for s in SPLITS]
    return np.concatenate([p for p in parts if p.size], axis=0)


def standardization_probe(inputs: np.ndarray, atol: float = 1e-3) -> None:
    """Assert the pipeline added no normalization: channels arrive 0/1.

    The difference channel of an exactly-zero-error pair is legitimately
    all zeros, so a (near-)zero std is accepted there.
    """
    if inputs.ndim != 4:
        raise ValueError(f"expected N x C x H x W inputs, got shape {inputs.shape}")
    means = inputs.mean(axis=(2, 3))
    stds = inputs.std(axis=(2, 3))
    if np.abs(means).max() > atol:
        raise AssertionError(f"channel means deviate from 0 by {np.abs(means).max():.2e}")
    unit = np.abs(stds - 1.0) <= atol
    degenerate = stds <= 1e-5
    bad = ~(unit | degenerate)
    if np.any(bad):
        raise AssertionError(
            f"{int(bad.sum())} channels have std off 1 (worst {stds[bad].max():.4f})"
        )
