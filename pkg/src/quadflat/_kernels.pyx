# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rigid-body and mixer kernels.

Mirrors ``_kernels_py`` exactly; the packed state is
``[r(3), v(3), R(9, row-major), omega(3)]``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


cdef void _deriv(const double* y, double p, double tx, double ty, double tz,
                 double m, double g, double Jx, double Jy, double Jz,
                 double* dy) noexcept nogil:
    cdef double wx = y[15], wy = y[16], wz = y[17]
    cdef int r
    dy[0] = y[3]
    dy[1] = y[4]
    dy[2] = y[5]
    # thrust along k_B, the third column of R
    dy[3] = y[8] * p / m
    dy[4] = y[11] * p / m
    dy[5] = y[14] * p / m - g
    # R' = R hat(w), row by row
    for r in range(3):
        dy[6 + 3 * r + 0] = y[6 + 3 * r + 1] * wz - y[6 + 3 * r + 2] * wy
        dy[6 + 3 * r + 1] = -y[6 + 3 * r + 0] * wz + y[6 + 3 * r + 2] * wx
        dy[6 + 3 * r + 2] = y[6 + 3 * r + 0] * wy - y[6 + 3 * r + 1] * wx
    dy[15] = (tx - (Jz - Jy) * wy * wz) / Jx
    dy[16] = (ty - (Jx - Jz) * wz * wx) / Jy
    dy[17] = (tz - (Jy - Jx) * wx * wy) / Jz


cdef void _orthonormalize(double* y) noexcept nogil:
    cdef double ix = y[6], iy = y[9], iz = y[12]
    cdef double jx = y[7], jy = y[10], jz = y[13]
    cdef double n = sqrt(ix * ix + iy * iy + iz * iz)
    ix /= n
    iy /= n
    iz /= n
    cdef double d = jx * ix + jy * iy + jz * iz
    jx -= d * ix
    jy -= d * iy
    jz -= d * iz
    n = sqrt(jx * jx + jy * jy + jz * jz)
    jx /= n
    jy /= n
    jz /= n
    y[6] = ix
    y[9] = iy
    y[12] = iz
    y[7] = jx
    y[10] = jy
    y[13] = jz
    y[8] = iy * jz - iz * jy
    y[11] = iz * jx - ix * jz
    y[14] = ix * jy - iy * jx


def derivative(y, double p, tau, double m, double g, double Jx, double Jy, double Jz):
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    out = np.empty(18)
    cdef double[::1] ov = out
    _deriv(&yv[0], p, tv[0], tv[1], tv[2], m, g, Jx, Jy, Jz, &ov[0])
    return out


def orthonormalize_packed(y):
    cdef double[::1] yv = y
    _orthonormalize(&yv[0])
    return y


def rk4_step(y, double p, tau, double m, double g, double Jx, double Jy, double Jz,
             double dt):
    cdef double[::1] y0 = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double tx = tv[0], ty = tv[1], tz = tv[2]
    cdef double k1[18]
    cdef double k2[18]
    cdef double k3[18]
    cdef double k4[18]
    cdef double tmp[18]
    cdef int n
    out = np.empty(18)
    cdef double[::1] ov = out
    with nogil:
        _deriv(&y0[0], p, tx, ty, tz, m, g, Jx, Jy, Jz, k1)
        for n in range(18):
            tmp[n] = y0[n] + 0.5 * dt * k1[n]
        _deriv(tmp, p, tx, ty, tz, m, g, Jx, Jy, Jz, k2)
        for n in range(18):
            tmp[n] = y0[n] + 0.5 * dt * k2[n]
        _deriv(tmp, p, tx, ty, tz, m, g, Jx, Jy, Jz, k3)
        for n in range(18):
            tmp[n] = y0[n] + dt * k3[n]
        _deriv(tmp, p, tx, ty, tz, m, g, Jx, Jy, Jz, k4)
        for n in range(18):
            ov[n] = y0[n] + (dt / 6.0) * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
        _orthonormalize(&ov[0])
    return out


def mixer_forward(s_sq, double kF, double kM, double L):
    cdef double s1 = s_sq[0], s2 = s_sq[1], s3 = s_sq[2], s4 = s_sq[3]
    p = kF * (s1 + s2 + s3 + s4)
    tau = np.array([kF * L * (s4 - s2), kF * L * (s3 - s1), kM * (s2 + s4 - s1 - s3)])
    return p, tau


def mixer_inverse(double p, tau, double kF, double kM, double L, double s_max):
    cdef double a = p / (4.0 * kF)
    cdef double bx = tau[0] / (2.0 * kF * L)
    cdef double by = tau[1] / (2.0 * kF * L)
    cdef double c = tau[2] / (4.0 * kM)
    cdef double q[4]
    q[0] = a - by - c
    q[1] = a - bx + c
    q[2] = a + by - c
    q[3] = a + bx + c
    s = np.empty(4)
    sat = np.zeros(4, dtype=bool)
    cdef double[::1] sv = s
    cdef int n
    for n in range(4):
        if q[n] < 0.0:
            sv[n] = 0.0
            sat[n] = True
        else:
            sv[n] = sqrt(q[n])
            if sv[n] > s_max:
                sv[n] = s_max
                sat[n] = True
    return s, sat
