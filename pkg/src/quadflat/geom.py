"""Rotation-matrix and heading-vector primitives.

Rotations are plain 3x3 numpy arrays whose columns are the body axes
``i_B, j_B, k_B`` expressed in the world frame. Headings are unit vectors in
the world X-Y plane. Nothing in here touches Euler angles.
"""

import math

import numpy as np

from .errors import DegenerateHeading, NonSkewInput, NotNearRotation

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

SKEW_TOL = 1e-9
HEADING_TOL = 1e-9


def hat(v):
    """Cross-product matrix: ``hat(v) @ w == np.cross(v, w)``."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vee(M, tol=SKEW_TOL):
    """Inverse of :func:`hat`.

    ``[[0, a, b], [-a, 0, c], [-b, -c, 0]]`` maps to ``(-c, b, -a)``.
    Raises :class:`NonSkewInput` if ``M + M.T`` has any entry above `tol`.
    """
    M = np.asarray(M, dtype=float)
    if np.max(np.abs(M + M.T)) > tol:
        raise NonSkewInput("matrix is not skew-symmetric")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (np.max(np.abs(R.T @ R - np.eye(3))) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)


def heading_of(R):
    """Normalized projection of the body x-axis onto the world X-Y plane."""
    ix, iy = R[0, 0], R[1, 0]
    n = math.hypot(ix, iy)
    if n <= HEADING_TOL:
        raise DegenerateHeading("body x-axis is vertical; heading undefined")
    return np.array([ix / n, iy / n, 0.0])


def yaw_of(h):
    """Principal angle of a heading vector, in (-pi, pi]."""
    psi = math.atan2(h[1], h[0])
    if psi == -math.pi:
        psi = math.pi
    return psi


def heading_from_yaw(psi):
    return np.array([math.cos(psi), math.sin(psi), 0.0])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a == -math.pi:
        a = math.pi
    return a


def gram_schmidt(M):
    """Orthonormalize columns: i_B from column 0, j_B from column 1, k_B = i_B x j_B.

    No validation; the integrator calls this after every step.
    """
    i = M[:, 0] / np.linalg.norm(M[:, 0])
    j = M[:, 1] - (M[:, 1] @ i) * i
    j = j / np.linalg.norm(j)
    k = np.cross(i, j)
    return np.column_stack((i, j, k))


def reorthonormalize(M, tol=1e-3):
    """Snap a nearly-orthonormal matrix back onto SO(3).

    Raises :class:`NotNearRotation` when `M` is further than `tol` (Frobenius)
    from its Gram-Schmidt projection, or has negative orientation.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise NotNearRotation("expected a finite 3x3 matrix")
    if np.linalg.det(M) <= 0.0:
        raise NotNearRotation("matrix has non-positive determinant")
    R = gram_schmidt(M)
    if np.linalg.norm(R - M) > tol:
        raise NotNearRotation(f"matrix is {np.linalg.norm(R - M):.3g} from SO(3)")
    return R


def exp_so3(w):
    """Rodrigues formula for ``expm(hat(w))``."""
    theta = float(np.linalg.norm(w))
    K = hat(w)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return (np.eye(3) + (math.sin(theta) / theta) * K
            + ((1.0 - math.cos(theta)) / theta**2) * K @ K)


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
