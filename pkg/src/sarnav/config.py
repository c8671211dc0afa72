"""Run configuration: defaults, JSON loading, and exhaustive validation.

Defaults reproduce the sim-5-sec analog geometry: 50 m/s straight and level
flight at 1000 m altitude, scene 1732 m cross-track (30 degree grazing),
5 s aperture at 200 Hz, 80x80 pixels at 0.3 m spacing. The scene center sits
at the broadside of the aperture end (scene_at_fraction = 1.0), which is the
placement where a pure along-track velocity error blurs without shifting.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .nav import Trajectory, generate_level_trajectory
from .sim import ImageGrid, RadarParams


class ConfigError(ValueError):
    """Invalid or unknown configuration field; message names the field."""


@dataclass(frozen=True)
class GeometryConfig:
    speed: float = 50.0            # [m/s]
    altitude: float = 1000.0       # [m]
    standoff_ct: float = 1732.0    # [m] scene center cross-track offset
    aperture_s: float = 5.0        # [s]
    pulse_rate: float = 200.0      # [Hz]
    scene_at_fraction: float = 1.0  # scene AT position as fraction of aperture length


@dataclass(frozen=True)
class RadarConfig:
    wavelength: float = 0.03125        # [m]
    range_resolution: float = 0.3      # [m]
    range_bin_spacing: float = 0.15    # [m]
    window_margin: float = 50.0        # [m]
    noise_std: float = 0.0             # complex noise std, 0 disables


@dataclass(frozen=True)
class GridConfig:
    n_at: int = 80
    n_ct: int = 80
    at_spacing: float = 0.3   # [m]
    ct_spacing: float = 0.3   # [m]


@dataclass(frozen=True)
class SamplingConfig:
    position_std: float = 1.5       # [m] per active position axis
    velocity_std: float = 0.2       # [m/s] per active velocity axis
    n_targets: int = 10
    pairs_per_target: int = 20
    target_region: float = 4.5      # [m] half-extent of target placement around center
    split_ratios: tuple = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    scenario: int = 1
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def validate(self) -> None:
        """Check every module precondition before any work starts."""
        g = self.geometry
        for name in ("speed", "altitude", "standoff_ct", "aperture_s", "pulse_rate"):
            if not (np.isfinite(getattr(g, name)) and getattr(g, name) > 0):
                raise ConfigError(f"geometry.{name} must be positive, got {getattr(g, name)}")
        if not 0.0 <= g.scene_at_fraction <= 1.0:
            raise ConfigError(
                f"geometry.scene_at_fraction must be in [0, 1], got {g.scene_at_fraction}"
            )
        r = self.radar
        for name in ("wavelength", "range_resolution", "range_bin_spacing", "window_margin"):
            if not (np.isfinite(getattr(r, name)) and getattr(r, name) > 0):
                raise ConfigError(f"radar.{name} must be positive, got {getattr(r, name)}")
        if r.range_bin_spacing > r.range_resolution / 2.0 + 1e-12:
            raise ConfigError("radar.range_bin_spacing must be <= range_resolution/2")
        if r.noise_std < 0:
            raise ConfigError(f"radar.noise_std must be non-negative, got {r.noise_std}")
        gr = self.grid
        if gr.n_at < 1 or gr.n_ct < 1:
            raise ConfigError("grid.n_at and grid.n_ct must be at least 1")
        if gr.at_spacing <= 0 or gr.ct_spacing <= 0:
            raise ConfigError("grid spacings must be positive")
        s = self.sampling
        if s.position_std <= 0 or s.velocity_std <= 0:
            raise ConfigError("sampling stds must be positive")
        if s.n_targets < 3:
            raise ConfigError(f"sampling.n_targets must be >= 3, got {s.n_targets}")
        if s.pairs_per_target < 1:
            raise ConfigError("sampling.pairs_per_target must be >= 1")
        if s.target_region <= 0:
            raise ConfigError("sampling.target_region must be positive")
        ratios = tuple(s.split_ratios)
        if len(ratios) != 3 or any(x < 0 for x in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(
                f"sampling.split_ratios must be three non-negative values summing to 1, got {ratios}"
            )
        if self.scenario not in range(1, 7):
            raise ConfigError(f"scenario must be in 1..6, got {self.scenario}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    # --- derived artifacts -------------------------------------------------

    def make_trajectory(self) -> Trajectory:
        g = self.geometry
        return generate_level_trajectory(g.speed, g.altitude, g.aperture_s, g.pulse_rate)

    def scene_center(self) -> np.ndarray:
        g = self.geometry
        return np.array([g.speed * g.aperture_s * g.scene_at_fraction, g.standoff_ct, 0.0])

    def make_grid(self) -> ImageGrid:
        gr = self.grid
        return ImageGrid(
            self.scene_center(),
            at_spacing=gr.at_spacing,
            ct_spacing=gr.ct_spacing,
            n_at=gr.n_at,
            n_ct=gr.n_ct,
        )

    def make_radar_params(self, traj: Trajectory, positions) -> RadarParams:
        r = self.radar
        return RadarParams.for_geometry(
            traj,
            positions,
            margin=r.window_margin,
            carrier_wavelength=r.wavelength,
            range_resolution=r.range_resolution,
            range_bin_spacing=r.range_bin_spacing,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sampling"]["split_ratios"] = list(self.sampling.split_ratios)
        return d


_SECTIONS = {
    "geometry": GeometryConfig,
    "radar": RadarConfig,
    "grid": GridConfig,
    "sampling": SamplingConfig,
}
_SCALARS = ("scenario", "seed", "workers", "out")


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config field {section}.{key}")
    if "split_ratios" in data:
        data = dict(data)
        data["split_ratios"] = tuple(data["split_ratios"])
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"invalid {section} section: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    for key in data:
        if key not in _SECTIONS and key not in _SCALARS:
            raise ConfigError(f"unknown config field {key}")
    kwargs = {}
    for section, cls in _SECTIONS.items():
        payload = data.get(section, {})
        if not isinstance(payload, dict):
            raise ConfigError(f"config field {section} must be an object")
        kwargs[section] = _build_section(cls, payload, section)
    for key in _SCALARS:
        if key in data:
            kwargs[key] = data[key]
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
