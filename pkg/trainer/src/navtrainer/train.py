"""Training loops: single-phase fit and the two-phase transfer protocol.

The loss is the average MSE over standardized labels, so a model that
always predicts zero scores 1.0 and anything below 1 indicates the network
extracts real information from the image pairs.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import load_manifest, load_split, standardization_probe, load_arrays
from .model import build_model


@dataclass
class TrainSpec:
    dataset_dir: str
    pretrain_dir: str | None = None
    backbone: str = "small"
    pretrained_weights: bool = False
    freeze_backbone: bool = False
    epochs: int = 30
    pretrain_epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-4
    cosine_decay: bool = True
    seed: int = 0
    deterministic: bool = True
    checkpoint_path: str = "model.pt"
    metrics_path: str | None = None
    probe_inputs: bool = True


def _seed_everything(seed: int, deterministic: bool) -> torch.Generator:
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


def _epoch_mse(model: nn.Module, loader: DataLoader) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for xb, yb in loader:
            pred = model(xb)
            total += torch.sum((pred - yb) ** 2).item()
            count += yb.numel()
    return total / count if count else float("nan")


def _fit_phase(model, train_ds, val_ds, spec: TrainSpec, epochs: int,
               gen: torch.Generator, phase: str) -> dict:
    loader = DataLoader(train_ds, batch_size=spec.batch_size, shuffle=True, generator=gen)
    val_loader = DataLoader(val_ds, batch_size=spec.batch_size) if val_ds is not None else None
    opt = torch.optim.Adam(
        (p for p in model.parameters() if p.requires_grad), lr=spec.learning_rate
    )
    sched = (
        torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(1, epochs))
        if spec.cosine_decay else None
    )
    loss_fn = nn.MSELoss()
    history = []
    for epoch in range(epochs):
        model.train()
        total, count = 0.0, 0
        for xb, yb in loader:
            opt.zero_grad()
            pred = model(xb)
            loss = loss_fn(pred, yb)
            if not math.isfinite(loss.item()):
                raise RuntimeError(
                    f"non-finite loss {loss.item()} at phase {phase} epoch {epoch}"
                )
            loss.backward()
            opt.step()
            total += loss.item() * yb.shape[0]
            count += yb.shape[0]
        if sched is not None:
            sched.step()
        entry = {"phase": phase, "epoch": epoch, "train_mse": total / count}
        if val_loader is not None and len(val_ds):
            entry["val_mse"] = _epoch_mse(model, val_loader)
        history.append(entry)
    return {"name": phase, "epochs": epochs, "history": history}


def _load_training_data(dataset_dir: str, spec: TrainSpec, expected=None):
    manifest = load_manifest(dataset_dir)
    if expected is not None:
        if manifest.scenario != expected.scenario:
            raise ValueError(
                f"scenario mismatch: pretrain dataset is scenario "
                f"{manifest.scenario}, main dataset is scenario {expected.scenario}"
            )
        if manifest.m != expected.m:
            raise ValueError("pretrain and main datasets have different label widths")
    inputs, _ = load_arrays(dataset_dir, manifest, "train")
    if spec.probe_inputs and inputs.size:
        standardization_probe(inputs)
    train_ds = load_split(dataset_dir, manifest, "train")
    val_ds = load_split(dataset_dir, manifest, "val")
    return manifest, train_ds, val_ds, inputs.shape[2:]


def transfer_train(spec: TrainSpec) -> dict:
    """Train, optionally preceded by a pretraining phase on another dataset.

    With no pretrain directory this is exactly a plain training run. Returns
    the metrics document; the checkpoint lands at spec.checkpoint_path.
    """
    gen = _seed_everything(spec.seed, spec.deterministic)
    manifest, train_ds, val_ds, input_hw = _load_training_data(spec.dataset_dir, spec)
    model = build_model(
        spec.backbone, manifest.m, input_hw=tuple(input_hw),
        pretrained=spec.pretrained_weights, freeze_backbone=spec.freeze_backbone,
    )
    phases = []
    if spec.pretrain_dir:
        _, pre_train, pre_val, _ = _load_training_data(
            spec.pretrain_dir, spec, expected=manifest
        )
        phases.append(
            _fit_phase(model, pre_train, pre_val, spec, spec.pretrain_epochs, gen, "pretrain")
        )
    phases.append(_fit_phase(model, train_ds, val_ds, spec, spec.epochs, gen, "finetune"))

    metrics = {
        "scenario": manifest.scenario,
        "components": list(manifest.components),
        "backbone": spec.backbone,
        "seed": spec.seed,
        "phases": phases,
        "final_train_mse": phases[-1]["history"][-1]["train_mse"],
        "final_val_mse": phases[-1]["history"][-1].get("val_mse"),
    }
    checkpoint = {
        "backbone": spec.backbone,
        "n_outputs": manifest.m,
        "input_hw": list(input_hw),
        "scenario": manifest.scenario,
        "components": list(manifest.components),
        "model_state": model.state_dict(),
        "spec": asdict(spec),
    }
    os.makedirs(os.path.dirname(spec.checkpoint_path) or ".", exist_ok=True)
    torch.save(checkpoint, spec.checkpoint_path)
    if spec.metrics_path:
        with open(spec.metrics_path, "w") as f:
            json.dump(metrics, f, indent=2, sort_keys=True)
            f.write("\n")
    return metrics


def train(spec: TrainSpec) -> dict:
    """Single-phase training; alias for transfer_train without a pretrain dir."""
    if spec.pretrain_dir:
        spec = TrainSpec(**{**asdict(spec), "pretrain_dir": None})
    return transfer_train(spec)


def compare_transfer_to_scratch(spec: TrainSpec, out_path=None) -> dict:
    """Train with and without the pretraining phase and report both.

    Emits the paired document only; whether transfer helps is an empirical
    question the caller gets to judge.
    """
    if not spec.pretrain_dir:
        raise ValueError("comparison requires a pretrain directory")
    base = asdict(spec)
    base["metrics_path"] = None
    root, ext = os.path.splitext(spec.checkpoint_path)
    transfer_metrics = transfer_train(
        TrainSpec(**{**base, "checkpoint_path": f"{root}_transfer{ext}"})
    )
    scratch_metrics = transfer_train(
        TrainSpec(**{**base, "pretrain_dir": None, "checkpoint_path": f"{root}_scratch{ext}"})
    )
    doc = {
        "scenario": transfer_metrics["scenario"],
        "components": transfer_metrics["components"],
        "transfer": {
            "final_train_mse": transfer_metrics["final_train_mse"],
            "final_val_mse": transfer_metrics["final_val_mse"],
            "checkpoint": f"{root}_transfer{ext}",
        },
        "scratch": {
            "final_train_mse": scratch_metrics["final_train_mse"],
            "final_val_mse": scratch_metrics["final_val_mse"],
            "checkpoint": f"{root}_scratch{ext}",
        },
    }
    if out_path:
        with open(out_path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    return doc
