"""Checkpoint evaluation: per-component MSE in the baseline metrics schema."""

from __future__ import annotations

import json

import numpy as np
import torch

from .data import SPLITS, load_arrays, load_manifest
from .model import build_model


def load_checkpoint(path):
    doc = torch.load(path, map_location="cpu", weights_only=True)
    model = build_model(doc["backbone"], doc["n_outputs"], input_hw=tuple(doc["input_hw"]))
    model.load_state_dict(doc["model_state"])
    model.eval()
    return model, doc


def _predict(model, inputs: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = []
    with torch.no_grad():
        for start in range(0, inputs.shape[0], batch_size):
            xb = torch.from_numpy(inputs[start : start + batch_size].copy())
            out.append(model(xb).numpy())
    return np.concatenate(out, axis=0) if out else np.zeros((0, 0), dtype=np.float32)


def _gather(dataset_dir, manifest, split: str):
    if split == "all":
        parts = [load_arrays(dataset_dir, manifest, s) for s in SPLITS]
        inputs = np.concatenate([p[0] for p in parts if p[0].size], axis=0)
        labels = np.concatenate([p[1] for p in parts if p[1].size], axis=0)
        return inputs, labels
    return load_arrays(dataset_dir, manifest, split)


def evaluate(checkpoint_path, dataset_dir, split: str = "test",
             predict_zero: bool = False, out_path=None) -> dict:
    """Per-component and average MSE of a checkpoint (or the zero predictor).

    The JSON document matches the classical baseline's schema so the two are
    directly comparable; predicting zero on the standardizing set scores 1.0
    by construction.
    """
    manifest = load_manifest(dataset_dir)
    inputs, labels = _gather(dataset_dir, manifest, split)
    if inputs.shape[0] == 0:
        raise ValueError(f"dataset {split} split is empty")
    if predict_zero:
        preds = np.zeros_like(labels, dtype=np.float64)
    else:
        model, doc = load_checkpoint(checkpoint_path)
        if doc["n_outputs"] != manifest.m:
            raise ValueError(
                f"checkpoint head width {doc['n_outputs']} does not match "
                f"dataset label width {manifest.m}"
            )
        preds = _predict(model, inputs).astype(np.float64)
    sq = (labels.astype(np.float64) - preds) ** 2
    per_component = sq.mean(axis=0)
    metrics = {
        "scenario": manifest.scenario,
        "split": split,
        "n": int(inputs.shape[0]),
        "components": list(manifest.components),
        "mse": {c: float(v) for c, v in zip(manifest.components, per_component)},
        "average_mse": float(sq.mean()),
        "predict_zero_reference": 1.0,
    }
    if out_path:
        with open(out_path, "w") as f:
            json.dump(metrics, f, indent=2, sort_keys=True)
            f.write("\n")
    return metrics
