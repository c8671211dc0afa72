"""Point-target phase-history simulation and back-projection image formation.

The simulator produces range-compressed pulses directly: each point target
contributes an ideal normalized-sinc range response at its true slant range
with the two-way carrier phase. Back-projection sums range-interpolated,
phase-corrected pulse returns per pixel.

Both kernels parallelize over independent work items (pulses / pixel rows)
with a fixed inner accumulation order, so output is bit-identical for any
worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .nav import NavError, Trajectory, corrupt_trajectory

SARIMAGE_MAGIC = "sarnav-image"

DEFAULT_WAVELENGTH = 0.03125  # [m] 9.6 GHz X-band
DEFAULT_RANGE_RESOLUTION = 0.3  # [m] post-compression
DEFAULT_BIN_SPACING = 0.15  # [m]
DEFAULT_WINDOW_MARGIN = 50.0  # [m] window slack beyond the scene's range span


class TargetOutOfWindowError(ValueError):
    """A scene target falls outside the simulated range window."""


@dataclass(frozen=True)
class RadarParams:
    """Range-compressed radar model parameters.

    range_bin_spacing must satisfy the interpolation Nyquist bound
    (at most half the range resolution).
    """

    carrier_wavelength: float = DEFAULT_WAVELENGTH
    range_resolution: float = DEFAULT_RANGE_RESOLUTION
    range_bin_spacing: float = DEFAULT_BIN_SPACING
    n_range_bins: int = 800
    range_window_start: float = 1900.0

    def __post_init__(self):
        for name in ("carrier_wavelength", "range_resolution", "range_bin_spacing",
                     "range_window_start"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be positive, got {val}")
        if self.n_range_bins < 2:
            raise ValueError(f"n_range_bins must be >= 2, got {self.n_range_bins}")
        if self.range_bin_spacing > self.range_resolution / 2.0 + 1e-12:
            raise ValueError(
                "range_bin_spacing must be <= range_resolution/2 "
                f"({self.range_bin_spacing} > {self.range_resolution / 2.0})"
            )

    @property
    def bin_ranges(self) -> np.ndarray:
        return self.range_window_start + np.arange(self.n_range_bins) * self.range_bin_spacing

    @property
    def range_window_end(self) -> float:
        return self.range_window_start + (self.n_range_bins - 1) * self.range_bin_spacing

    def params_hash(self) -> str:
        doc = {
            "carrier_wavelength": self.carrier_wavelength,
            "range_resolution": self.range_resolution,
            "range_bin_spacing": self.range_bin_spacing,
            "n_range_bins": self.n_range_bins,
            "range_window_start": self.range_window_start,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def for_geometry(cls, traj: Trajectory, positions, margin: float = DEFAULT_WINDOW_MARGIN,
                     **overrides) -> "RadarParams":
        """Size the range window to cover the given ground positions +/- margin."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        d = positions[None, :, :] - traj.positions[:, None, :]
        ranges = np.sqrt((d * d).sum(axis=2))
        spacing = overrides.get("range_bin_spacing", DEFAULT_BIN_SPACING)
        start = ranges.min() - margin
        n_bins = int(np.ceil((ranges.max() + margin - start) / spacing)) + 1
        return cls(range_window_start=start, n_range_bins=n_bins, **overrides)


@dataclass(frozen=True)
class TargetScene:
    """Point targets on the ground plane (D = 0) with non-negative reflectivity."""

    positions: np.ndarray     # (K, 3) m
    reflectivity: np.ndarray  # (K,)

    def __post_init__(self):
        pos = np.array(np.atleast_2d(self.positions), dtype=float)
        refl = np.array(np.atleast_1d(self.reflectivity), dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] == 0:
            raise ValueError(f"positions must be (K, 3) with K >= 1, got {pos.shape}")
        if refl.shape != (pos.shape[0],):
            raise ValueError("reflectivity must have one entry per target")
        if np.any(pos[:, 2] != 0.0):
            raise ValueError("target positions must lie on the ground plane (D = 0)")
        if np.any(refl < 0.0) or not np.all(np.isfinite(refl)):
            raise ValueError("reflectivity must be finite and non-negative")
        pos.flags.writeable = False
        refl.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "reflectivity", refl)

    @classmethod
    def from_targets(cls, targets) -> "TargetScene":
        """Build from an iterable of (position, reflectivity) pairs."""
        pos = np.array([t[0] for t in targets], dtype=float)
        refl = np.array([t[1] for t in targets], dtype=float)
        return cls(pos, refl)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class PhaseHistory:
    """Range-compressed complex pulse matrix, one row per pulse."""

    pulses: np.ndarray  # (P, R) complex
    times: np.ndarray   # (P,) s

    def __post_init__(self):
        p = np.asarray(self.pulses)
        t = np.asarray(self.times, dtype=float)
        if p.ndim != 2:
            raise ValueError(f"pulses must be 2-D, got shape {p.shape}")
        if t.shape != (p.shape[0],):
            raise ValueError("times must match the pulse count")
        object.__setattr__(self, "pulses", p)
        object.__setattr__(self, "times", t)

    @property
    def n_pulses(self) -> int:
        return self.pulses.shape[0]

    @property
    def n_range_bins(self) -> int:
        return self.pulses.shape[1]


@dataclass(frozen=True)
class ImageGrid:
    """Ground-plane pixel grid, axes aligned with AT (rows) and CT (columns)."""

    center: np.ndarray
    at_spacing: float = 0.3
    ct_spacing: float = 0.3
    n_at: int = 80
    n_ct: int = 80

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        if c.shape != (3,):
            raise ValueError(f"center must be a 3-vector, got shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if self.at_spacing <= 0.0 or self.ct_spacing <= 0.0:
            raise ValueError("pixel spacings must be positive")
        if self.n_at < 1 or self.n_ct < 1:
            raise ValueError("grid must have at least one pixel per axis")

    @property
    def at_coords(self) -> np.ndarray:
        return self.center[0] + (np.arange(self.n_at) - (self.n_at - 1) / 2.0) * self.at_spacing

    @property
    def ct_coords(self) -> np.ndarray:
        return self.center[1] + (np.arange(self.n_ct) - (self.n_ct - 1) / 2.0) * self.ct_spacing


@dataclass(frozen=True)
class SarImage:
    """Complex SAR image on an ImageGrid; magnitude is derived on demand."""

    pixels: np.ndarray
    grid: ImageGrid

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.grid.n_at, self.grid.n_ct):
            raise ValueError(
                f"pixels shape {px.shape} does not match grid "
                f"({self.grid.n_at}, {self.grid.n_ct})"
            )
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        object.__setattr__(self, "pixels", px)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.pixels)


def _chunks(n: int, workers: int):
    size = max(1, -(-n // max(1, workers)))
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def _run_chunked(fn, n: int, workers: int):
    spans = _chunks(n, workers)
    if workers <= 1 or len(spans) == 1:
        return [fn(s, e) for s, e in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda se: fn(*se), spans))


def simulate_phase_history(
    traj: Trajectory,
    scene: TargetScene,
    params: RadarParams,
    workers: int = 1,
    noise_std: float = 0.0,
    noise_seed: int = 0,
) -> PhaseHistory:
    """Simulate range-compressed returns from point targets.

    Pulse p, bin r holds sum_k sigma_k * sinc((r_range - R_pk)/res)
    * exp(-j 4 pi R_pk / lambda) with R_pk the true antenna-to-target
    distance. Accumulation order over targets is fixed (ascending index),
    so results are bit-identical for any worker count.
    """
    pos = traj.positions
    tgt = scene.positions
    # (P, K) slant ranges, written out elementwise to keep the op order fixed
    dx = pos[:, 0:1] - tgt[None, :, 0]
    dy = pos[:, 1:2] - tgt[None, :, 1]
    dz = pos[:, 2:3] - tgt[None, :, 2]
    ranges = np.sqrt(dx * dx + dy * dy + dz * dz)

    bad = (ranges < params.range_window_start) | (ranges > params.range_window_end)
    if np.any(bad):
        p_idx, k_idx = np.argwhere(bad)[0]
        raise TargetOutOfWindowError(
            f"target {k_idx} at range {ranges[p_idx, k_idx]:.2f} m for pulse "
            f"{p_idx} is outside the window "
            f"[{params.range_window_start:.2f}, {params.range_window_end:.2f}] m"
        )

    bins = params.bin_ranges
    phase_rate = -4.0 * np.pi / params.carrier_wavelength

    def sim_rows(start, end):
        out = np.zeros((end - start, params.n_range_bins), dtype=np.complex128)
        for k in range(len(scene)):
            r = ranges[start:end, k : k + 1]
            response = np.sinc((bins[None, :] - r) / params.range_resolution)
            out += scene.reflectivity[k] * response * np.exp(1j * (phase_rate * r))
        return out

    rows = _run_chunked(sim_rows, len(traj), workers)
    pulses = np.vstack(rows)
    if noise_std > 0.0:
        rng = np.random.default_rng(noise_seed)
        pulses = pulses + noise_std * (
            rng.standard_normal(pulses.shape) + 1j * rng.standard_normal(pulses.shape)
        )
    return PhaseHistory(pulses, traj.times)


def backproject(
    ph: PhaseHistory,
    traj: Trajectory,
    grid: ImageGrid,
    params: RadarParams,
    workers: int = 1,
) -> SarImage:
    """Form a SAR image by back-projection over the pixel grid.

    Each pixel sums, in ascending pulse order, the pulse row linearly
    interpolated at the antenna-to-pixel range times the matched carrier
    phase. Ranges outside the window contribute zero.
    """
    if ph.n_pulses != len(traj):
        raise ValueError(
            f"trajectory length {len(traj)} does not match pulse count {ph.n_pulses}"
        )
    if ph.n_range_bins != params.n_range_bins:
        raise ValueError("phase history bin count does not match params")

    at = grid.at_coords
    ct = grid.ct_coords
    z_pix = grid.center[2]
    pos = traj.positions
    pulses = ph.pulses
    inv_spacing = 1.0 / params.range_bin_spacing
    phase_rate = 4.0 * np.pi / params.carrier_wavelength
    n_bins = params.n_range_bins

    def bp_rows(start, end):
        x = at[start:end, None]
        y = ct[None, :]
        img = np.zeros((end - start, grid.n_ct), dtype=np.complex128)
        for p in range(len(traj)):
            dx = x - pos[p, 0]
            dy = y - pos[p, 1]
            dz = z_pix - pos[p, 2]
            r = np.sqrt(dx * dx + dy * dy + dz * dz)
            u = (r - params.range_window_start) * inv_spacing
            i0 = np.floor(u).astype(np.intp)
            frac = u - i0
            valid = (i0 >= 0) & (i0 < n_bins - 1)
            i0c = np.clip(i0, 0, n_bins - 2)
            row = pulses[p]
            vals = row[i0c] * (1.0 - frac) + row[i0c + 1] * frac
            contrib = vals * np.exp(1j * (phase_rate * r))
            contrib[~valid] = 0.0
            img += contrib
        return img

    blocks = _run_chunked(bp_rows, grid.n_at, workers)
    return SarImage(np.vstack(blocks), grid)


def form_image_pair(
    truth: Trajectory,
    err0: NavError,
    scene: TargetScene,
    grid: ImageGrid,
    params: RadarParams,
    workers: int = 1,
) -> tuple[SarImage, SarImage]:
    """Reference and distorted image from one simulated phase history.

    The phase history always comes from the true trajectory; the distorted
    image back-projects it along the corrupted trajectory.
    """
    ph = simulate_phase_history(truth, scene, params, workers=workers)
    reference = backproject(ph, truth, grid, params, workers=workers)
    distorted = backproject(ph, corrupt_trajectory(truth, err0), grid, params, workers=workers)
    return reference, distorted


def save_image(img: SarImage, path, params: RadarParams | None = None) -> None:
    """Write a SAR image: one JSON header line, then row-major '<c8' pixels."""
    header = {
        "magic": SARIMAGE_MAGIC,
        "n_at": img.grid.n_at,
        "n_ct": img.grid.n_ct,
        "center": list(img.grid.center),
        "at_spacing": img.grid.at_spacing,
        "ct_spacing": img.grid.ct_spacing,
        "params_hash": params.params_hash() if params is not None else None,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(np.ascontiguousarray(img.pixels).astype("<c8").tobytes())


def load_image(path) -> SarImage:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        if header.get("magic") != SARIMAGE_MAGIC:
            raise ValueError(f"{path} is not a SAR image file")
        n_at, n_ct = int(header["n_at"]), int(header["n_ct"])
        data = np.frombuffer(f.read(), dtype="<c8")
    if data.size != n_at * n_ct:
        raise ValueError(f"expected {n_at * n_ct} pixels, got {data.size}")
    grid = ImageGrid(
        np.asarray(header["center"], dtype=float),
        at_spacing=float(header["at_spacing"]),
        ct_spacing=float(header["ct_spacing"]),
        n_at=n_at,
        n_ct=n_ct,
    )
    return SarImage(data.reshape(n_at, n_ct).astype(np.complex128), grid)
