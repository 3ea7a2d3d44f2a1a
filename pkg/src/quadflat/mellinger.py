"""Mellinger controller: position loop feeding a geometric attitude loop.

Stateless. Gain names follow the force law as printed, so ``Kp`` acts on the
velocity error and ``Kv`` on the position error. The torque law is pure
feedback by default; ``feedforward=True`` adds the torque the reference
itself needs.
"""

from __future__ import annotations

import numpy as np

from .errors import ZeroForceSingularity
from .flatness import (
    SINGULAR_TOL, alpha_from_flat, attitude_from_flat, body_axes_from_thrust, omega_from_flat,
)
from .geom import E3, heading_from_yaw, vee
from .trajectories import FlatSample
from .tuning import MellingerGains
from .vehicle import ControlCommand, RigidState, VehicleParams


def desired_force(r, v, ref: FlatSample, gains: MellingerGains, params: VehicleParams):
    return (-gains.Kp * (v - ref.r1) - gains.Kv * (r - ref.r0)
            + params.m * params.g * E3 + params.m * ref.r2)


def desired_attitude(F_des, R, psi_T):
    """Thrust along the *current* k_B and the rotation aligning k_B with F_des."""
    n = float(np.linalg.norm(F_des))
    if n <= SINGULAR_TOL:
        raise ZeroForceSingularity("desired force vanished")
    p_des = float(F_des @ R[:, 2])
    R_des = body_axes_from_thrust(F_des / n, heading_from_yaw(psi_T))
    return p_des, R_des


def attitude_errors(R, R_des, omega, omega_T):
    M = 0.5 * (R_des.T @ R - R.T @ R_des)
    return vee(M), np.asarray(omega) - np.asarray(omega_T)


def trajectory_omega(ref: FlatSample, params: VehicleParams):
    """Body angular velocity the reference trajectory itself requires."""
    R_T, p_T = attitude_from_flat(ref, params)
    _, omega_T = omega_from_flat(ref, R_T, p_T, params)
    return omega_T


def trajectory_rates(ref: FlatSample, params: VehicleParams):
    """Body angular velocity and acceleration along the reference."""
    R_T, p_T = attitude_from_flat(ref, params)
    p1_T, omega_T = omega_from_flat(ref, R_T, p_T, params)
    _, alpha_T = alpha_from_flat(ref, R_T, p_T, p1_T, omega_T, params)
    return omega_T, alpha_T


def mellinger_output(state: RigidState, ref: FlatSample, gains: MellingerGains,
                     params: VehicleParams, feedforward=False) -> ControlCommand:
    F = desired_force(state.r, state.v, ref, gains, params)
    p_des, R_des = desired_attitude(F, state.R, ref.psi)
    if feedforward:
        omega_T, alpha_T = trajectory_rates(ref, params)
    else:
        omega_T = trajectory_omega(ref, params)
    e_R, e_w = attitude_errors(state.R, R_des, state.omega, omega_T)
    tau = -gains.KR * e_R - gains.Komega * e_w
    if feedforward:
        J = params.J_diag
        tau = tau + J * alpha_T + np.cross(state.omega, J * state.omega)
    return ControlCommand(p_des, tau)


class MellingerController:
    name = "mellinger"

    def __init__(self, gains: MellingerGains, params: VehicleParams, feedforward=False):
        self.gains = gains
        self.params = params
        self.feedforward = feedforward

    def reset(self):
        pass

    def command(self, state: RigidState, ref: FlatSample) -> ControlCommand:
        return mellinger_output(state, ref, self.gains, self.params, self.feedforward)
