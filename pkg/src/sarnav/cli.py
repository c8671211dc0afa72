"""Command-line front end: render, sweep, build, baseline.

Exit codes: 0 success, 1 configuration/validation failure, 2 runtime failure.
All commands are deterministic given config and seed; --checksum prints a
stable digest over every file the command wrote.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import dataset as ds
from . import distortion as dist
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .nav import NavError, corrupt_trajectory, save_trajectory
from .sim import TargetScene, backproject, save_image, simulate_phase_history

DEFAULT_SWEEP_MAGNITUDES = {
    "at_pos": (-3.0, -1.5, 0.0, 1.5, 3.0),
    "ct_pos": (-3.0, -1.5, 0.0, 1.5, 3.0),
    "d_pos": (-3.0, -1.5, 0.0, 1.5, 3.0),
    "at_vel": (-0.4, -0.2, 0.0, 0.2, 0.4),
    "ct_vel": (-0.2, -0.1, 0.0, 0.1, 0.2),
    "d_vel": (-0.2, -0.1, 0.0, 0.1, 0.2),
    "at_att": (-0.01, 0.0, 0.01),
    "ct_att": (-0.01, 0.0, 0.01),
    "d_att": (-0.01, 0.0, 0.01),
}

# Sharpness-ratio bands for 0.01 rad attitude errors at the default geometry,
# calibrated against the oracle sweep. D attitude decouples entirely here:
# with no horizontal specific force, a yaw error induces no position error.
ATTITUDE_SHARPNESS_BANDS = {
    "at_att": (0.05, 0.35),
    "ct_att": (0.75, 0.95),
    "d_att": (0.995, 1.005),
}


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "out", None) is not None:
        updates["out"] = args.out
    if updates:
        doc = cfg.to_dict()
        doc.update(updates)
        cfg = config_from_dict(doc)
    cfg.validate()
    return cfg


def _require_out(cfg: RunConfig) -> str:
    if not cfg.out:
        raise ConfigError("missing config field out (or pass --out)")
    return cfg.out


def _parse_err(spec: str) -> NavError:
    vec = np.zeros(9)
    if spec:
        for part in spec.split(","):
            if "=" not in part:
                raise ConfigError(f"bad --err entry {part!r}, expected axis=value")
            axis, _, value = part.partition("=")
            axis = axis.strip()
            if axis not in dist.ERROR_AXES:
                raise ConfigError(f"unknown error axis {axis!r} in --err")
            try:
                vec[dist.ERROR_AXES.index(axis)] = float(value)
            except ValueError as exc:
                raise ConfigError(f"bad --err value for {axis}: {value!r}") from exc
    return NavError.from_vector(vec)


def _checksum(paths) -> str:
    h = hashlib.sha256()
    for path in sorted(paths):
        h.update(os.path.basename(path).encode())
        with open(path, "rb") as f:
            h.update(f.read())
    return h.hexdigest()


def _maybe_checksum(args, paths) -> None:
    if getattr(args, "checksum", False) and paths:
        print(f"checksum sha256:{_checksum(paths)}")


def cmd_render(args) -> int:
    cfg = _load_run_config(args)
    out_dir = _require_out(cfg)
    err0 = _parse_err(args.err)
    truth = cfg.make_trajectory()
    grid = cfg.make_grid()
    scene = TargetScene(np.array([cfg.scene_center()]), np.array([1.0]))
    params = cfg.make_radar_params(truth, scene.positions)

    os.makedirs(out_dir, exist_ok=True)
    ph = simulate_phase_history(truth, scene, params, workers=cfg.workers,
                                noise_std=cfg.radar.noise_std, noise_seed=cfg.seed)
    reference = backproject(ph, truth, grid, params, workers=cfg.workers)
    est = corrupt_trajectory(truth, err0)
    distorted = backproject(ph, est, grid, params, workers=cfg.workers)

    outputs = []

    def emit(name, writer):
        path = os.path.join(out_dir, name)
        writer(path)
        outputs.append(path)

    emit("reference.sarimg", lambda p: save_image(reference, p, params))
    emit("distorted.sarimg", lambda p: save_image(distorted, p, params))
    emit("reference_mag.csv",
         lambda p: np.savetxt(p, reference.magnitude, delimiter=","))
    emit("distorted_mag.csv",
         lambda p: np.savetxt(p, distorted.magnitude, delimiter=","))
    emit("truth.traj", lambda p: save_trajectory(truth, p))
    emit("estimated.traj", lambda p: save_trajectory(est, p))

    print(f"rendered reference and distorted images to {out_dir}")
    _maybe_checksum(args, outputs)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_run_config(args)
    axis = args.axis
    if axis not in dist.ERROR_AXES:
        raise ConfigError(f"unknown error axis {axis!r}, expected one of {dist.ERROR_AXES}")
    if args.magnitudes:
        try:
            magnitudes = tuple(float(x) for x in args.magnitudes.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --magnitudes list {args.magnitudes!r}") from exc
    else:
        magnitudes = DEFAULT_SWEEP_MAGNITUDES[axis]
    if args.check and axis in ATTITUDE_SHARPNESS_BANDS:
        if magnitudes != DEFAULT_SWEEP_MAGNITUDES[axis]:
            raise ConfigError(
                "--assert for attitude axes requires the default magnitudes "
                "(the sharpness band is calibrated at 0.01 rad)"
            )

    truth = cfg.make_trajectory()
    grid = cfg.make_grid()
    scene = TargetScene(np.array([cfg.scene_center()]), np.array([1.0]))
    params = cfg.make_radar_params(truth, scene.positions)
    rows = dist.sensitivity_sweep(truth, scene, grid, params, axis, magnitudes,
                                  workers=cfg.workers)

    if cfg.out:
        os.makedirs(os.path.dirname(cfg.out) or ".", exist_ok=True)
        dist.write_sweep_csv(rows, cfg.out)
        print(f"wrote {len(rows)} sweep rows to {cfg.out}")
        _maybe_checksum(args, [cfg.out])
    else:
        print("error_axis,magnitude,at_shift_px,ct_shift_px,sharpness_ratio,classification")
        for r in rows:
            print(f"{r.error_axis},{r.magnitude!r},{r.measurement.at_shift!r},"
                  f"{r.measurement.ct_shift!r},{r.measurement.sharpness_ratio!r},"
                  f"{r.classification}")

    if args.check:
        failures = []
        for r in rows:
            if axis in ATTITUDE_SHARPNESS_BANDS:
                if r.magnitude == 0.0:
                    continue
                lo, hi = ATTITUDE_SHARPNESS_BANDS[axis]
                if not lo <= r.measurement.sharpness_ratio <= hi:
                    failures.append(
                        f"{axis} {r.magnitude}: sharpness {r.measurement.sharpness_ratio:.3f} "
                        f"outside [{lo}, {hi}]"
                    )
            else:
                expected = dist.expected_classification(axis, r.magnitude)
                if r.classification != expected:
                    failures.append(
                        f"{axis} {r.magnitude}: classified {r.classification}, expected {expected}"
                    )
        if failures:
            for msg in failures:
                print(f"ASSERT FAIL: {msg}", file=sys.stderr)
            return 2
        print(f"assert ok: {axis} matches the expected distortion pattern")
    return 0


def cmd_build(args) -> int:
    cfg = _load_run_config(args)
    out_dir = _require_out(cfg)
    manifest = ds.build_dataset(cfg, out_dir)
    print(f"built scenario-{manifest.scenario} dataset in {out_dir}")
    print(f"  components: {', '.join(manifest.components)}")
    print(f"  counts: train={manifest.counts['train']} val={manifest.counts['val']} "
          f"test={manifest.counts['test']}")
    print(f"  label std: {np.array2string(manifest.label_std, precision=4)}")
    outputs = [os.path.join(out_dir, "manifest.json")]
    for split in ds.SPLITS:
        outputs.append(os.path.join(out_dir, manifest.files[split]["inputs"]))
        outputs.append(os.path.join(out_dir, manifest.files[split]["labels"]))
    _maybe_checksum(args, outputs)
    return 0


def cmd_baseline(args) -> int:
    manifest = ds.load_manifest(args.dataset)
    if manifest.scenario != 1:
        raise ConfigError(
            f"baseline estimator requires a scenario-1 dataset, got scenario {manifest.scenario}"
        )
    inputs, labels = ds.load_split(args.dataset, manifest, args.split)
    if inputs.shape[0] == 0:
        raise ConfigError(f"dataset {args.split} split is empty")

    cfg = config_from_dict(manifest.config)
    truth = cfg.make_trajectory()
    grid = cfg.make_grid()
    params = cfg.make_radar_params(truth, np.array([cfg.scene_center()]))
    calibration = dist.calibrate_shift_map(truth, grid, params, workers=cfg.workers)

    estimates = np.empty((inputs.shape[0], 2))
    for n in range(inputs.shape[0]):
        dist_ch = inputs[n, 0].astype(float)
        ref_ch = inputs[n, 1].astype(float)
        estimates[n] = dist.baseline_estimate_scenario1(ref_ch, dist_ch, calibration)

    s_hat = (estimates - manifest.label_mean) / manifest.label_std
    per_component, average = ds.mse_metric(labels.astype(float), s_hat)
    metrics = {
        "scenario": manifest.scenario,
        "split": args.split,
        "n": int(inputs.shape[0]),
        "components": list(manifest.components),
        "mse": {c: float(v) for c, v in zip(manifest.components, per_component)},
        "average_mse": average,
        "predict_zero_reference": 1.0,
    }
    text = json.dumps(metrics, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
            f.write("\n")
        _maybe_checksum(args, [args.out])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarnav",
        description="SAR back-projection imaging under inertial navigation errors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--workers", type=int, help="worker pool size")
        p.add_argument("--checksum", action="store_true",
                       help="print a stable digest of all outputs")
        if with_out:
            p.add_argument("--out", help="output directory or file")

    p_render = sub.add_parser("render", help="render a reference/distorted image pair")
    common(p_render)
    p_render.add_argument("--err", default="",
                          help="initial error override, e.g. ct_pos=3.0,at_vel=0.2")
    p_render.set_defaults(func=cmd_render)

    p_sweep = sub.add_parser("sweep", help="sensitivity sweep over one error axis")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="error axis to sweep")
    p_sweep.add_argument("--magnitudes", help="comma-separated magnitudes")
    p_sweep.add_argument("--assert", dest="check", action="store_true",
                         help="exit nonzero unless the sweep matches the expected pattern")
    p_sweep.set_defaults(func=cmd_sweep)

    p_build = sub.add_parser("build", help="build an ML dataset directory")
    common(p_build)
    p_build.set_defaults(func=cmd_build)

    p_base = sub.add_parser("baseline", help="evaluate the shift-inversion baseline")
    p_base.add_argument("--dataset", required=True, help="dataset directory")
    p_base.add_argument("--split", default="test", choices=list(ds.SPLITS))
    p_base.add_argument("--out", help="metrics JSON output path")
    p_base.add_argument("--checksum", action="store_true")
    p_base.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map onto the validation code
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
