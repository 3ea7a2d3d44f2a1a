"""Differential-flatness maps from a flat sample to attitude, thrust and torque.

Every map is written with the rotation-matrix/heading-vector formulation.
Body-frame components of omega and alpha are returned as 3-vectors
``(along i_B, along j_B, along k_B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlipOverSingularity, ZeroThrustSingularity
from .geom import E3, heading_from_yaw
from .trajectories import FlatSample
from .vehicle import VehicleParams

SINGULAR_TOL = 1e-9


@dataclass
class FlatOutputs:
    R: np.ndarray
    p: float
    p1: float
    p2: float
    omega: np.ndarray
    alpha: np.ndarray
    tau: np.ndarray


def _k_prime(h):
    # k x h for a horizontal h
    return np.array([-h[1], h[0], 0.0])


def body_axes_from_thrust(k_B, h):
    """Complete a rotation from a thrust axis and a heading vector.

    ``i_B = ((k x h) x k_B) / ||.||`` and ``j_B = k_B x i_B``.
    """
    a = np.cross(_k_prime(h), k_B)
    n = np.linalg.norm(a)
    if n <= SINGULAR_TOL:
        raise FlipOverSingularity("thrust axis is parallel to k x h")
    i_B = a / n
    j_B = np.cross(k_B, i_B)
    return np.column_stack((i_B, j_B, k_B))


def attitude_from_flat(sample: FlatSample, params: VehicleParams):
    """Rotation and thrust magnitude that realize the sample's acceleration and yaw."""
    F = params.m * sample.r2 + params.m * params.g * E3
    p = float(np.linalg.norm(F))
    if p <= SINGULAR_TOL:
        raise ZeroThrustSingularity("required thrust vanishes (free fall)")
    R = body_axes_from_thrust(F / p, heading_from_yaw(sample.psi))
    return R, p


def omega_from_flat(sample: FlatSample, R, p, params: VehicleParams):
    """Thrust rate and body angular velocity from jerk and yaw rate."""
    if p <= SINGULAR_TOL:
        raise ZeroThrustSingularity("thrust must be positive")
    i_B, j_B, k_B = R[:, 0], R[:, 1], R[:, 2]
    h = heading_from_yaw(sample.psi)
    kp = _k_prime(h)
    den = kp @ j_B
    if abs(den) <= SINGULAR_TOL:
        raise FlipOverSingularity("(k x h) . j_B vanished")

    mr3 = params.m * sample.r3
    p1 = float(mr3 @ k_B)
    h_w = (mr3 - p1 * k_B) / p
    w_i = -(h_w @ j_B)
    w_j = h_w @ i_B
    w_k = (w_j * (kp @ k_B) + sample.psi1 * (h @ i_B)) / den
    return p1, np.array([w_i, w_j, w_k])


def alpha_from_flat(sample: FlatSample, R, p, p1, omega, params: VehicleParams):
    """Thrust second derivative and body angular acceleration from snap and yaw acceleration.

    `omega` is body-frame; `p`, `p1` are the current thrust and thrust rate.
    """
    if p <= SINGULAR_TOL:
        raise ZeroThrustSingularity("thrust must be positive")
    i_B, j_B, k_B = R[:, 0], R[:, 1], R[:, 2]
    h = heading_from_yaw(sample.psi)
    kp = _k_prime(h)
    den = kp @ j_B
    if abs(den) <= SINGULAR_TOL:
        raise FlipOverSingularity("(k x h) . j_B vanished")

    w = R @ omega
    w_x_k = np.cross(w, k_B)
    w_x_i = np.cross(w, i_B)
    h_p = params.m * sample.r4 - p * np.cross(w, w_x_k) - 2.0 * p1 * w_x_k
    p2 = float(h_p @ k_B)
    h_a = (h_p - p2 * k_B) / p
    a_i = -(h_a @ j_B)
    a_j = h_a @ i_B

    psi1, psi2 = sample.psi1, sample.psi2
    V = (psi2 * h + psi1**2 * kp) @ i_B + 2.0 * psi1 * (h @ w_x_i)
    a_k = (V + a_j * (kp @ k_B) - kp @ np.cross(w, w_x_i)) / den
    return p2, np.array([a_i, a_j, a_k])


def torque_from_alpha(alpha, omega, params: VehicleParams):
    J = params.J_diag
    return J * alpha + np.cross(omega, J * omega)


def feedforward(sample: FlatSample, params: VehicleParams) -> FlatOutputs:
    """Open-loop attitude, thrust chain and body torque along a flat sample."""
    R, p = attitude_from_flat(sample, params)
    p1, omega = omega_from_flat(sample, R, p, params)
    p2, alpha = alpha_from_flat(sample, R, p, p1, omega, params)
    return FlatOutputs(R, p, p1, p2, omega, alpha, torque_from_alpha(alpha, omega, params))


# Alternative scalar forms for the k_B components, derived from a 3-2-1 Euler
# decomposition that takes the roll rate equal to omega_x. Kept for
# cross-checking only.

def omega_z_draft(psi1, omega_y, R):
    kz = R[2, 2]
    if kz <= SINGULAR_TOL:
        raise FlipOverSingularity("k_B . k must be positive")
    return (psi1 - omega_y * R[2, 1]) / kz


def alpha_z_draft(psi2, omega, alpha_y, R):
    kz = R[2, 2]
    if kz <= SINGULAR_TOL:
        raise FlipOverSingularity("k_B . k must be positive")
    jz = R[2, 1]
    wx, wy, wz = omega
    return (psi2 - wx * wy * kz + wx * wz * jz - alpha_y * jz) / kz


def finite_difference_residuals(traj, times, params: VehicleParams, h=1e-4, h_traj=1e-5):
    """Worst-case numerical-vs-analytic discrepancies along a trajectory.

    `traj` maps time to a FlatSample. Returns a dict of maxima:

    - ``traj_k`` (k=1..4): relative error of the k-th derivative against a
      central difference of derivative k-1 (step `h_traj`)
    - ``R_omega``: Frobenius norm of ``R(t+h) - R(t) expm(hat(omega) h)``
    - ``omega_alpha``: ``|(omega(t+h) - omega(t)) / h - alpha(t)|``
    - ``p_p1`` and ``p1_p2``: central-difference errors on the thrust chain
    """
    from .geom import exp_so3

    res = {f"traj_{k}": 0.0 for k in range(1, 5)}
    res.update(R_omega=0.0, omega_alpha=0.0, p_p1=0.0, p1_p2=0.0)
    for t in times:
        s0, sp, sm = traj(t), traj(t + h_traj), traj(t - h_traj)
        for k in range(1, 5):
            fd = (sp.derivative(k - 1) - sm.derivative(k - 1)) / (2.0 * h_traj)
            an = s0.derivative(k)
            err = np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an)))
            res[f"traj_{k}"] = max(res[f"traj_{k}"], float(err))

        f0 = feedforward(s0, params)
        fp = feedforward(traj(t + h), params)
        fm = feedforward(traj(t - h), params)
        res["R_omega"] = max(res["R_omega"], float(np.linalg.norm(
            fp.R - f0.R @ exp_so3(f0.omega * h))))
        res["omega_alpha"] = max(res["omega_alpha"], float(np.max(np.abs(
            (fp.omega - f0.omega) / h - f0.alpha))))
        res["p_p1"] = max(res["p_p1"], abs((fp.p - fm.p) / (2.0 * h) - f0.p1))
        res["p1_p2"] = max(res["p1_p2"], abs((fp.p1 - fm.p1) / (2.0 * h) - f0.p2))
    return res


FD_TOLERANCES = {
    "traj_1": 1e-5, "traj_2": 1e-5, "traj_3": 1e-5, "traj_4": 1e-5,
    "R_omega": 1e-6, "omega_alpha": 1e-3, "p_p1": 1e-5, "p1_p2": 1e-5,
}
