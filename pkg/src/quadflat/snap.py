"""Snap controller: parallel position (4th order) and yaw (2nd order) loops.

Acceleration and jerk are not measured; they are rebuilt from the thrust and
thrust rate the controller stored on its previous cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FlipOverSingularity
from .flatness import SINGULAR_TOL, alpha_from_flat, torque_from_alpha
from .geom import E3, heading_of, wrap_angle, yaw_of
from .trajectories import FlatSample
from .tuning import SnapGains
from .vehicle import ControlCommand, RigidState, VehicleParams


@dataclass
class SnapState:
    p: float
    p1: float = 0.0

    @classmethod
    def hover(cls, params: VehicleParams):
        return cls(params.m * params.g, 0.0)


@dataclass
class SnapMeasurement:
    r: np.ndarray
    v: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    psi: float
    psi1: float


def estimate_motion(state: RigidState, snap_state: SnapState, params: VehicleParams):
    """Acceleration and jerk from stored thrust via the translational dynamics."""
    k_B = state.R[:, 2]
    w = state.omega_world
    r2 = (snap_state.p * k_B - params.m * params.g * E3) / params.m
    r3 = (snap_state.p1 * k_B + snap_state.p * np.cross(w, k_B)) / params.m
    return r2, r3


def yaw_and_rate(R, omega):
    """Current yaw (heading angle) and its rate, from R and body omega."""
    h = heading_of(R)
    den = h @ R[:, 0]
    if den <= SINGULAR_TOL:
        raise FlipOverSingularity("h . i_B vanished")
    kp = np.array([-h[1], h[0], 0.0])
    psi1 = (omega[2] * (kp @ R[:, 1]) - omega[1] * (kp @ R[:, 2])) / den
    return yaw_of(h), float(psi1)


def snap_law(meas: SnapMeasurement, ref: FlatSample, gains: SnapGains, feedforward=False):
    """Desired snap and yaw acceleration.

    The printed law has no ``r4_T`` / ``psi2_T`` terms; `feedforward` adds them.
    The yaw error is wrapped to the shortest arc.
    """
    r4 = -(gains.K1 * (meas.r3 - ref.r3) + gains.K2 * (meas.r2 - ref.r2)
           + gains.K3 * (meas.v - ref.r1) + gains.K4 * (meas.r - ref.r0))
    e_psi = wrap_angle(meas.psi - ref.psi)
    psi2 = -gains.K5 * (meas.psi1 - ref.psi1) - gains.K6 * e_psi
    if feedforward:
        r4 = r4 + ref.r4
        psi2 += ref.psi2
    return r4, psi2


def snap_output(r4_des, psi2_des, state: RigidState, snap_state: SnapState,
                params: VehicleParams, dt):
    """Map desired snap / yaw acceleration to a thrust-torque command.

    Returns ``(command, new_snap_state, p2_des)``. The thrust sent is the
    stored thrust for this instant; the stored pair then advances by one
    semi-implicit Euler step (rate first, then thrust) driven by ``p2_des``.
    """
    psi, psi1 = yaw_and_rate(state.R, state.omega)
    desired = FlatSample(r4=r4_des, psi=psi, psi1=psi1, psi2=psi2_des)
    p2, alpha = alpha_from_flat(desired, state.R, snap_state.p, snap_state.p1,
                                state.omega, params)
    tau = torque_from_alpha(alpha, state.omega, params)
    p1 = snap_state.p1 + p2 * dt
    p = snap_state.p + p1 * dt
    return ControlCommand(snap_state.p, tau), SnapState(p, p1), p2


class SnapController:
    """Stateful wrapper owning the stored thrust of one vehicle."""

    name = "snap"

    def __init__(self, gains: SnapGains, params: VehicleParams, dt, feedforward=False):
        self.gains = gains
        self.params = params
        self.dt = dt
        self.feedforward = feedforward
        self.state = SnapState.hover(params)
        self.last_p2 = 0.0

    def reset(self, snap_state: SnapState | None = None):
        self.state = snap_state or SnapState.hover(self.params)

    def command(self, state: RigidState, ref: FlatSample) -> ControlCommand:
        r2, r3 = estimate_motion(state, self.state, self.params)
        psi, psi1 = yaw_and_rate(state.R, state.omega)
        meas = SnapMeasurement(state.r, state.v, r2, r3, psi, psi1)
        r4_des, psi2_des = snap_law(meas, ref, self.gains, self.feedforward)
        cmd, self.state, self.last_p2 = snap_output(r4_des, psi2_des, state, self.state,
                                                    self.params, self.dt)
        if not math.isfinite(cmd.p):
            raise FloatingPointError("non-finite thrust command")
        return cmd
