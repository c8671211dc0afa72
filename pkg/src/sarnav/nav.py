"""Strapdown navigation states, first-order error dynamics, and level-flight trajectories.

Frames and conventions:
    - Navigation frame n is along-track / cross-track / down (AT, CT, D):
      x aligned with nominal velocity, z in the direction of gravity,
      y by the right-hand rule. Ground plane is z = 0, so an aircraft at
      altitude h flies at D = -h.
    - Quaternions are scalar-first, body-to-nav, Hamilton product.
    - Error states are (position, velocity, attitude) 3-vectors stacked
      into a 9-vector in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

G0 = 9.80665  # standard gravity [m/s^2]

QUAT_NORM_TOL = 1e-12
SMALL_ANGLE_LIMIT = 0.1  # [rad] validity bound of the first-order attitude model

TRAJECTORY_MAGIC = "sarnav-trajectory"


def _vec3(x, name: str) -> np.ndarray:
    v = np.array(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite, got {v}")
    v.flags.writeable = False
    return v


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b of scalar-first quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


@dataclass(frozen=True)
class NavState:
    """Aircraft position, velocity, and attitude at one pulse epoch.

    Attributes:
        p_n: position in the nav frame [m].
        v_n: velocity in the nav frame [m/s].
        q_bn: body-to-nav attitude quaternion, scalar first, unit norm.
        t: seconds since aperture start, non-negative.
    """

    p_n: np.ndarray
    v_n: np.ndarray
    q_bn: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "p_n", _vec3(self.p_n, "p_n"))
        object.__setattr__(self, "v_n", _vec3(self.v_n, "v_n"))
        q = np.array(self.q_bn, dtype=float)
        if q.shape != (4,):
            raise ValueError(f"q_bn must be a 4-vector, got shape {q.shape}")
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            raise ValueError(f"q_bn must be unit norm, |q| = {np.linalg.norm(q)!r}")
        q.flags.writeable = False
        object.__setattr__(self, "q_bn", q)
        t = float(self.t)
        if not np.isfinite(t) or t < 0.0:
            raise ValueError(f"t must be finite and non-negative, got {t}")
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class NavError:
    """Nine-element navigation error: position, velocity, attitude.

    Attitude error must stay inside the small-angle regime the first-order
    propagation model assumes.
    """

    dp_n: np.ndarray
    dv_n: np.ndarray
    dtheta_n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dp_n", _vec3(self.dp_n, "dp_n"))
        object.__setattr__(self, "dv_n", _vec3(self.dv_n, "dv_n"))
        dth = _vec3(self.dtheta_n, "dtheta_n")
        if np.linalg.norm(dth) >= SMALL_ANGLE_LIMIT:
            raise ValueError(
                f"|dtheta_n| = {np.linalg.norm(dth):.4g} rad exceeds the "
                f"small-angle limit {SMALL_ANGLE_LIMIT}"
            )
        object.__setattr__(self, "dtheta_n", dth)

    @classmethod
    def zero(cls) -> "NavError":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x) -> "NavError":
        x = np.asarray(x, dtype=float)
        if x.shape != (9,):
            raise ValueError(f"error vector must have shape (9,), got {x.shape}")
        return cls(x[0:3], x[3:6], x[6:9])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dp_n, self.dv_n, self.dtheta_n])


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled flight path over one synthetic aperture.

    Sample arrays are indexed by pulse. ``nu_n`` is the nominal specific
    force in the nav frame, constant over the aperture for straight and
    level flight.
    """

    times: np.ndarray       # (P,) seconds since aperture start
    positions: np.ndarray   # (P, 3) m
    velocities: np.ndarray  # (P, 3) m/s
    quaternions: np.ndarray  # (P, 4) scalar-first, unit norm
    dt: float               # inter-pulse interval [s]
    nu_n: np.ndarray        # (3,) m/s^2

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        p = np.array(self.positions, dtype=float)
        v = np.array(self.velocities, dtype=float)
        q = np.array(self.quaternions, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a non-empty 1-D array")
        n = t.size
        if p.shape != (n, 3) or v.shape != (n, 3) or q.shape != (n, 4):
            raise ValueError(
                f"inconsistent sample shapes: times {t.shape}, positions "
                f"{p.shape}, velocities {v.shape}, quaternions {q.shape}"
            )
        if t[0] < 0.0:
            raise ValueError("epochs must be non-negative")
        dt = float(self.dt)
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        if n > 1:
            steps = np.diff(t)
            if np.any(steps <= 0.0):
                raise ValueError("epochs must be strictly increasing")
            if np.max(np.abs(steps - dt)) > 1e-12:
                raise ValueError("epochs must be uniformly spaced at dt within 1e-12 s")
        norms = np.linalg.norm(q, axis=1)
        if np.max(np.abs(norms - 1.0)) > QUAT_NORM_TOL:
            raise ValueError("all quaternions must be unit norm")
        for arr, name in ((t, "times"), (p, "positions"), (v, "velocities"), (q, "quaternions")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "quaternions", q)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "nu_n", _vec3(self.nu_n, "nu_n"))

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> NavState:
        return NavState(
            self.positions[i], self.velocities[i], self.quaternions[i], self.times[i]
        )

    @property
    def samples(self) -> tuple[NavState, ...]:
        return tuple(self.state(i) for i in range(len(self)))


@dataclass(frozen=True)
class TransitionMatrix:
    """9x9 first-order error state transition matrix.

    Block structure [[I, I*dt, (nu x)*dt^2/2], [0, I, (nu x)*dt], [0, 0, I]];
    the off-diagonal coupling comes from the nominal specific force.
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (9, 9):
            raise ValueError(f"phi must be 9x9, got {phi.shape}")
        eye = np.eye(3)
        zero = np.zeros((3, 3))
        for r in range(3):
            if not np.array_equal(phi[3 * r : 3 * r + 3, 3 * r : 3 * r + 3], eye):
                raise ValueError("diagonal blocks must be exactly identity")
        if not (
            np.array_equal(phi[3:6, 0:3], zero)
            and np.array_equal(phi[6:9, 0:3], zero)
            and np.array_equal(phi[6:9, 3:6], zero)
        ):
            raise ValueError("lower-left blocks must be exactly zero")
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)


def cross_matrix(v) -> np.ndarray:
    """Skew-symmetric matrix M such that M @ w == v x w."""
    v = _vec3(v, "v")
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def state_transition(nu_n, dt: float) -> TransitionMatrix:
    """Error state transition over an interval dt under specific force nu_n."""
    nu_n = _vec3(nu_n, "nu_n")
    dt = float(dt)
    if dt < 0.0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    nx = cross_matrix(nu_n)
    phi = np.eye(9)
    phi[0:3, 3:6] = np.eye(3) * dt
    phi[0:3, 6:9] = nx * (dt * dt / 2.0)
    phi[3:6, 6:9] = nx * dt
    return TransitionMatrix(phi)


def propagate_error(err0: NavError, nu_n, dt: float) -> NavError:
    """Propagate an initial navigation error forward by dt.

    First-order model: position picks up the velocity error integral plus
    the specific-force/attitude coupling; attitude error is constant.
    """
    phi = state_transition(nu_n, dt).phi
    return NavError.from_vector(phi @ err0.as_vector())


def apply_corrections(est: NavState, err: NavError) -> NavState:
    """Recover the true state from an estimate and its error.

    Position and velocity corrections are additive. The attitude correction
    multiplies the small-angle error quaternion [1, -dtheta/2] onto the
    estimate from the left, then renormalizes.
    """
    q_err = np.array([1.0, *(-0.5 * err.dtheta_n)])
    q = quat_normalize(quat_multiply(q_err, est.q_bn))
    return NavState(est.p_n + err.dp_n, est.v_n + err.dv_n, q, est.t)


def _quat_left_matrix(p: np.ndarray) -> np.ndarray:
    """4x4 matrix L with L @ q == p ⊗ q."""
    w, x, y, z = p
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def _propagated_terms(err0: NavError, nu_n: np.ndarray, taus: np.ndarray):
    """Propagated (dp, dv) arrays over elapsed times; dtheta is constant."""
    coupling = cross_matrix(nu_n) @ err0.dtheta_n
    taus = taus[:, None]
    dp = err0.dp_n[None, :] + err0.dv_n[None, :] * taus + coupling[None, :] * (taus * taus / 2.0)
    dv = err0.dv_n[None, :] + coupling[None, :] * taus
    return dp, dv


def corrupt_trajectory(truth: Trajectory, err0: NavError) -> Trajectory:
    """Synthesize the estimated (INS-indicated) trajectory for a true one.

    Inverts the correction relations exactly at each epoch with the error
    propagated from the first epoch, so that applying the propagated
    corrections to the output recovers truth.
    """
    taus = truth.times - truth.times[0]
    dp, dv = _propagated_terms(err0, truth.nu_n, taus)
    # dtheta is constant under propagation, so one inverse error quaternion
    # serves every epoch
    q_err = np.array([1.0, *(-0.5 * err0.dtheta_n)])
    quat = truth.quaternions @ _quat_left_matrix(quat_conjugate(q_err)).T
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return Trajectory(
        truth.times, truth.positions - dp, truth.velocities - dv, quat,
        truth.dt, truth.nu_n,
    )


def correct_trajectory(est: Trajectory, err0: NavError) -> Trajectory:
    """Recover the true trajectory from an estimate and its initial errors.

    Propagates err0 to every epoch and applies the correction relations;
    exact inverse of corrupt_trajectory.
    """
    taus = est.times - est.times[0]
    dp, dv = _propagated_terms(err0, est.nu_n, taus)
    q_err = np.array([1.0, *(-0.5 * err0.dtheta_n)])
    quat = est.quaternions @ _quat_left_matrix(q_err).T
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return Trajectory(
        est.times, est.positions + dp, est.velocities + dv, quat, est.dt, est.nu_n
    )


def generate_level_trajectory(
    speed: float, altitude: float, duration: float, pulse_rate: float
) -> Trajectory:
    """Straight and level flight along the AT axis.

    The aircraft starts at the origin, flies at constant speed at the given
    altitude (D = -altitude), attitude identity. Specific force is
    (0, 0, -g): lift exactly cancels gravity.
    """
    for name, val in (
        ("speed", speed),
        ("altitude", altitude),
        ("duration", duration),
        ("pulse_rate", pulse_rate),
    ):
        if not (np.isfinite(val) and val > 0.0):
            raise ValueError(f"{name} must be positive, got {val}")
    n = int(np.floor(duration * pulse_rate)) + 1
    times = np.arange(n) / pulse_rate
    pos = np.zeros((n, 3))
    pos[:, 0] = speed * times
    pos[:, 2] = -altitude
    vel = np.tile([speed, 0.0, 0.0], (n, 1))
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return Trajectory(times, pos, vel, quat, 1.0 / pulse_rate, np.array([0.0, 0.0, -G0]))


def save_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory: one JSON header line, then float64 LE rows (t, p, v, q)."""
    header = {
        "magic": TRAJECTORY_MAGIC,
        "count": len(traj),
        "dt": traj.dt,
        "nu_n": list(traj.nu_n),
    }
    rows = np.hstack(
        [traj.times[:, None], traj.positions, traj.velocities, traj.quaternions]
    ).astype("<f8")
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(rows.tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as f:
        header_line = f.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("magic") != TRAJECTORY_MAGIC:
            raise ValueError(f"{path} is not a trajectory file")
        n = int(header["count"])
        rows = np.frombuffer(f.read(), dtype="<f8")
    if rows.size != 11 * n:
        raise ValueError(f"expected {11 * n} float64 values, got {rows.size}")
    rows = rows.reshape(n, 11)
    return Trajectory(
        rows[:, 0],
        rows[:, 1:4],
        rows[:, 4:7],
        rows[:, 7:11],
        float(header["dt"]),
        np.asarray(header["nu_n"], dtype=float),
    )
