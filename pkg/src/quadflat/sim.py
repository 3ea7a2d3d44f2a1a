"""Closed-loop simulation, tracking metrics, Omega sweeps and breaking points."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, EmptyLog, QuadflatError
from .geom import heading_of, rot_z, yaw_of
from .mellinger import MellingerController
from .snap import SnapController
from .trajectories import TrajectorySpec
from .tuning import (
    MELLINGER_ATTITUDE_COMPLEX,
    MELLINGER_ATTITUDE_REAL,
    MELLINGER_POSITION_POLES,
    SNAP_POSITION_POLES,
    SNAP_YAW_POLES,
    PoleSet,
    mellinger_gains_from_poles,
    snap_gains_from_poles,
)
from .vehicle import ControlCommand, RigidState, VehicleParams, mixer_forward, mixer_inverse, rk4_step

COLUMNS = ("t", "x", "y", "z", "xT", "yT", "zT", "vx", "vy", "vz", "psi", "psiT",
           "p_cmd", "taux", "tauy", "tauz", "s1", "s2", "s3", "s4",
           "sat1", "sat2", "sat3", "sat4")
_COL = {name: n for n, name in enumerate(COLUMNS)}

COMPLETED = "completed"
DIVERGED = "diverged"

DIVERGENCE_THRESHOLD = 25.0
BREAKING_THRESHOLD = 5.0


@dataclass(frozen=True)
class SimConfig:
    controller: str = "snap"
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    poles_pos: PoleSet | None = None
    poles_att: PoleSet | None = None
    poles_yaw: PoleSet | None = None
    params: VehicleParams = field(default_factory=VehicleParams)
    dt: float = 0.01
    duration: float = 10.0
    feedforward: bool = False
    attitude_scaling: str = "unit"
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.controller not in ("snap", "mellinger"):
            raise ConfigError(f"unknown controller {self.controller!r}")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if not self.duration >= self.dt:
            raise ConfigError("duration must be at least one step")
        for name in ("poles_pos", "poles_att", "poles_yaw"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, PoleSet):
                object.__setattr__(self, name, PoleSet(value))

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def resolved_poles(self):
        if self.controller == "snap":
            return {"position": self.poles_pos or PoleSet(SNAP_POSITION_POLES),
                    "yaw": self.poles_yaw or PoleSet(SNAP_YAW_POLES)}
        return {"position": self.poles_pos or PoleSet(MELLINGER_POSITION_POLES),
                "attitude": self.poles_att or PoleSet(MELLINGER_ATTITUDE_COMPLEX)}

    def build_controller(self):
        poles = self.resolved_poles()
        if self.controller == "snap":
            gains = snap_gains_from_poles(poles["position"], poles["yaw"])
            return SnapController(gains, self.params, self.dt, self.feedforward)
        gains = mellinger_gains_from_poles(poles["position"], poles["attitude"], self.params,
                                           self.attitude_scaling)
        return MellingerController(gains, self.params, self.feedforward)

    def to_dict(self):
        return {
            "controller": self.controller,
            "trajectory": self.trajectory.to_dict(),
            "poles": {k: str(v) for k, v in self.resolved_poles().items()},
            "params": self.params.to_dict(),
            "dt": self.dt,
            "duration": self.duration,
            "feedforward": self.feedforward,
            "attitude_scaling": self.attitude_scaling,
            "divergence_threshold": self.divergence_threshold,
        }


PRESETS = {
    "snap": dict(controller="snap"),
    "mellinger-complex": dict(controller="mellinger", poles_att=MELLINGER_ATTITUDE_COMPLEX),
    "mellinger-real": dict(controller="mellinger", poles_att=MELLINGER_ATTITUDE_REAL),
}


def preset(name, **overrides) -> SimConfig:
    """Named configurations: ``snap``, ``mellinger-complex``, ``mellinger-real``."""
    return SimConfig(**{**PRESETS[name], **overrides})


@dataclass
class SimLog:
    """Time-indexed rows (see ``COLUMNS``) plus terminal status."""

    rows: np.ndarray
    status: str = COMPLETED
    divergence_time: float | None = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return self.rows[:, _COL[name]]

    @property
    def t(self):
        return self.column("t")

    @property
    def r(self):
        return self.rows[:, 1:4]

    @property
    def r_T(self):
        return self.rows[:, 4:7]

    @property
    def speeds(self):
        return self.rows[:, 16:20]

    @property
    def saturated(self):
        return self.rows[:, 20:24] != 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for row in self.rows:
                w.writerow([f"{x:.9g}" for x in row[:20]] + [str(int(x)) for x in row[20:]])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise ValueError("unexpected SimLog header")
            rows = [[float(x) for x in line] for line in reader]
        return cls(np.array(rows, dtype=float).reshape(-1, len(COLUMNS)))


def _make_row(t, state, ref, psi, cmd, speeds):
    row = np.empty(len(COLUMNS))
    row[0] = t
    row[1:4] = state.r
    row[4:7] = ref.r0
    row[7:10] = state.v
    row[10] = psi
    row[11] = ref.psi
    row[12] = cmd.p
    row[13:16] = cmd.tau
    row[16:20] = speeds.s
    row[20:24] = speeds.saturated
    return row


def initial_state(config: SimConfig) -> RigidState:
    """Level attitude at the trajectory start, facing the reference yaw, at rest."""
    ref0 = config.trajectory.sample(0.0)
    return RigidState(ref0.r0.copy(), np.zeros(3), rot_z(ref0.psi), np.zeros(3))


def _measured_yaw(R):
    try:
        return yaw_of(heading_of(R))
    except QuadflatError:
        return math.nan


def control_step(controller, state: RigidState, ref, t, config: SimConfig):
    """One control tick for one vehicle.

    Returns ``(row, next_state, failed)``. `next_state` is None when the tick
    ends the run (controller failure, non-finite values or divergence).
    """
    params = config.params
    try:
        cmd = controller.command(state, ref)
        speeds = mixer_inverse(cmd, params)
        failed = False
    except (QuadflatError, FloatingPointError):
        cmd = ControlCommand(math.nan, np.full(3, math.nan))
        speeds = mixer_inverse(ControlCommand(0.0, np.zeros(3)), params)
        failed = True
    row = _make_row(t, state, ref, _measured_yaw(state.R), cmd, speeds)
    err = float(np.linalg.norm(state.r - ref.r0))
    if failed or not np.all(np.isfinite(row)) or err > config.divergence_threshold:
        return row, None, True
    p, tau = mixer_forward(speeds.s**2, params)
    return row, rk4_step(state, ControlCommand(p, tau), config.dt, params), False


def closed_loop(config: SimConfig, state: RigidState | None = None, controller=None) -> SimLog:
    """Run one simulation.

    Each step samples the reference, runs the controller, clamps rotor speeds
    through the mixer, and integrates with the thrust/torque those clamped
    speeds actually produce. Halts with status ``diverged`` when the tracking
    error exceeds the threshold, anything goes non-finite, or a controller
    singularity is hit.
    """
    state = state or initial_state(config)
    controller = controller or config.build_controller()
    rows = []
    for k in range(config.n_steps + 1):
        t = k * config.dt
        row, state, bad = control_step(controller, state, config.trajectory.sample(t), t, config)
        rows.append(row)
        if bad:
            return SimLog(np.array(rows), DIVERGED, t)
    return SimLog(np.array(rows), COMPLETED, None)


def max_tracking_error(log: SimLog) -> float:
    if len(log) == 0:
        raise EmptyLog("log has no rows")
    return float(np.max(np.linalg.norm(log.r - log.r_T, axis=1)))


def saturation_events(log: SimLog):
    """``(count of rows with any saturated rotor, time of the first or None)``."""
    if len(log) == 0:
        raise EmptyLog("log has no rows")
    hit = np.any(log.saturated, axis=1)
    count = int(np.count_nonzero(hit))
    return count, (float(log.t[np.argmax(hit)]) if count else None)


@dataclass(frozen=True)
class SweepRow:
    Omega: float
    delta: float
    status: str
    first_saturation_time: float | None
    divergence_time: float | None = None


def omega_grid(omega_min, omega_max, omega_step):
    if not omega_step > 0.0:
        raise ConfigError("omega step must be positive")
    if omega_max < omega_min:
        raise ConfigError("omega max is below omega min")
    n = int(math.floor((omega_max - omega_min) / omega_step + 1e-9)) + 1
    return [round(omega_min + k * omega_step, 12) for k in range(n)]


def _run_omega(args):
    config, omega = args
    cfg = replace(config, trajectory=replace(config.trajectory, kind="helix", Omega=omega))
    log = closed_loop(cfg)
    _, t_sat = saturation_events(log)
    return SweepRow(omega, max_tracking_error(log), log.status, t_sat, log.divergence_time)


def sweep(config: SimConfig, omega_min=0.0, omega_max=2.0, omega_step=0.1, jobs=1):
    """One helix run per Omega on the grid, in ascending Omega order."""
    tasks = [(config, w) for w in omega_grid(omega_min, omega_max, omega_step)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_omega, tasks))
    return [_run_omega(task) for task in tasks]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("Omega", "delta", "status", "first_saturation_time"))
        for r in rows:
            t_sat = "" if r.first_saturation_time is None else f"{r.first_saturation_time:.9g}"
            w.writerow((f"{r.Omega:.9g}", f"{r.delta:.9g}", r.status, t_sat))


def detect_breaking_point(rows, threshold=BREAKING_THRESHOLD):
    """Smallest Omega that diverged or exceeded `threshold` metres of error."""
    for r in rows:
        if r.status == DIVERGED or r.delta > threshold:
            return r.Omega
    return None
