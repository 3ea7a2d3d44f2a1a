"""Pure-Python/numpy versions of the hot kernels.

Same signatures as the compiled ``_kernels`` extension. The packed state is an
18-vector ``[r(3), v(3), R(9, row-major), omega(3)]``.
"""

import math

import numpy as np

BACKEND = "python"


def derivative(y, p, tau, m, g, Jx, Jy, Jz):
    R = y[6:15].reshape(3, 3)
    w = y[15:18]
    wx, wy, wz = w
    dy = np.empty(18)
    dy[0:3] = y[3:6]
    dy[3:6] = R[:, 2] * (p / m)
    dy[5] -= g
    # R' = R hat(w)
    W = np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])
    dy[6:15] = (R @ W).ravel()
    dy[15] = (tau[0] - (Jz - Jy) * wy * wz) / Jx
    dy[16] = (tau[1] - (Jx - Jz) * wz * wx) / Jy
    dy[17] = (tau[2] - (Jy - Jx) * wx * wy) / Jz
    return dy


def orthonormalize_packed(y):
    R = y[6:15].reshape(3, 3)
    i = R[:, 0] / math.sqrt(R[:, 0] @ R[:, 0])
    j = R[:, 1] - (R[:, 1] @ i) * i
    j = j / math.sqrt(j @ j)
    k = np.cross(i, j)
    y[6:15] = np.column_stack((i, j, k)).ravel()
    return y


def rk4_step(y, p, tau, m, g, Jx, Jy, Jz, dt):
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    k1 = derivative(y, p, tau, m, g, Jx, Jy, Jz)
    k2 = derivative(y + 0.5 * dt * k1, p, tau, m, g, Jx, Jy, Jz)
    k3 = derivative(y + 0.5 * dt * k2, p, tau, m, g, Jx, Jy, Jz)
    k4 = derivative(y + dt * k3, p, tau, m, g, Jx, Jy, Jz)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return orthonormalize_packed(out)


def mixer_forward(s_sq, kF, kM, L):
    s1, s2, s3, s4 = s_sq
    p = kF * (s1 + s2 + s3 + s4)
    tau = np.array([kF * L * (s4 - s2), kF * L * (s3 - s1), kM * (s2 + s4 - s1 - s3)])
    return p, tau


def mixer_inverse(p, tau, kF, kM, L, s_max):
    a = p / (4.0 * kF)
    bx = tau[0] / (2.0 * kF * L)
    by = tau[1] / (2.0 * kF * L)
    c = tau[2] / (4.0 * kM)
    s_sq = (a - by - c, a - bx + c, a + by - c, a + bx + c)
    s = np.empty(4)
    sat = np.zeros(4, dtype=bool)
    for n, q in enumerate(s_sq):
        if q < 0.0:
            s[n] = 0.0
            sat[n] = True
        else:
            s[n] = math.sqrt(q)
            if s[n] > s_max:
                s[n] = s_max
                sat[n] = True
    return s, sat
