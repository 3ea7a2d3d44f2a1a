"""Vehicle parameters, rotor mixer with clamping, and rigid-body dynamics.

Torques are body-frame throughout: the mixer produces ``R^T tau`` directly and
the rotational equation with a constant diagonal inertia is a body-frame
statement.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import ConfigError
from .geom import E3, hat

DEFAULT_S_MAX = 400.0


@dataclass(frozen=True)
class VehicleParams:
    m: float = 0.5
    g: float = 9.81
    L: float = 0.25
    Jx: float = 0.0196
    Jy: float = 0.0196
    Jz: float = 0.0264
    kF: float = 3e-5
    kM: float = 1.1e-6
    s_max: float = DEFAULT_S_MAX

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0.0) or math.isnan(value):
                raise ConfigError(f"vehicle parameter {name} must be positive, got {value!r}")

    @property
    def J(self):
        return np.diag([self.Jx, self.Jy, self.Jz])

    @property
    def J_diag(self):
        return np.array([self.Jx, self.Jy, self.Jz])

    @property
    def mixer_matrix(self):
        kF, kM, L = self.kF, self.kM, self.L
        return np.array([
            [kF, kF, kF, kF],
            [0.0, -kF * L, 0.0, kF * L],
            [-kF * L, 0.0, kF * L, 0.0],
            [-kM, kM, -kM, kM],
        ])

    @property
    def hover_speed(self):
        return math.sqrt(self.m * self.g / (4.0 * self.kF))

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["s_max"]):
            d["s_max"] = None
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"m", "g", "L", "Jx", "Jy", "Jz", "kF", "kM", "s_max"}
        if unknown:
            raise ConfigError(f"unknown vehicle parameter(s): {sorted(unknown)}")
        kwargs = {}
        for k, v in d.items():
            if k == "s_max" and (v is None or v == "inf"):
                v = math.inf
            try:
                kwargs[k] = float(v)
            except (TypeError, ValueError):
                raise ConfigError(f"vehicle parameter {k} is not a number: {v!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read vehicle params from {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("vehicle params JSON must be an object")
        return cls.from_dict(data)

    def with_s_max(self, s_max):
        d = asdict(self)
        d["s_max"] = s_max
        return VehicleParams(**d)


@dataclass
class RigidState:
    """Position, velocity (world), rotation matrix, body angular velocity."""

    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)

    def pack(self):
        return np.concatenate((self.r, self.v, self.R.ravel(), self.omega))

    @classmethod
    def unpack(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:15].reshape(3, 3).copy(), y[15:18].copy())

    def copy(self):
        return RigidState(self.r.copy(), self.v.copy(), self.R.copy(), self.omega.copy())

    @property
    def omega_world(self):
        return self.R @ self.omega


@dataclass
class ControlCommand:
    p: float
    tau: np.ndarray

    def __post_init__(self):
        self.p = float(self.p)
        self.tau = np.asarray(self.tau, dtype=float)


@dataclass
class RotorSpeeds:
    s: np.ndarray
    saturated: np.ndarray

    @property
    def any_saturated(self):
        return bool(np.any(self.saturated))


class StateDerivative(NamedTuple):
    r_dot: np.ndarray
    v_dot: np.ndarray
    R_dot: np.ndarray
    omega_dot: np.ndarray


def mixer_forward(s_sq, params: VehicleParams):
    """Squared rotor speeds -> (thrust magnitude, body torque)."""
    return _backend.kernels.mixer_forward(np.asarray(s_sq, dtype=float),
                                          params.kF, params.kM, params.L)


def mixer_inverse(cmd: ControlCommand, params: VehicleParams) -> RotorSpeeds:
    """Solve the mixer for rotor speeds, clamping each into ``[0, s_max]``.

    A negative squared speed becomes 0 and a speed above ``s_max`` becomes
    ``s_max``; either way that rotor's saturation flag is set.
    """
    s, sat = _backend.kernels.mixer_inverse(cmd.p, cmd.tau, params.kF, params.kM,
                                            params.L, params.s_max)
    return RotorSpeeds(s, sat)


def applied_command(speeds: RotorSpeeds, params: VehicleParams) -> ControlCommand:
    p, tau = mixer_forward(speeds.s**2, params)
    return ControlCommand(p, tau)


def dynamics(state: RigidState, cmd: ControlCommand, params: VehicleParams) -> StateDerivative:
    w = state.omega
    J = params.J_diag
    v_dot = (cmd.p * state.R[:, 2] - params.m * params.g * E3) / params.m
    R_dot = state.R @ hat(w)
    omega_dot = (cmd.tau - np.cross(w, J * w)) / J
    return StateDerivative(state.v.copy(), v_dot, R_dot, omega_dot)


def rk4_step(state: RigidState, cmd: ControlCommand, dt, params: VehicleParams) -> RigidState:
    """One classical RK4 step with the command held constant, then Gram-Schmidt."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    y = _backend.kernels.rk4_step(state.pack(), cmd.p, cmd.tau, params.m, params.g,
                                  params.Jx, params.Jy, params.Jz, dt)
    return RigidState.unpack(y)
