"""Reference trajectories with closed-form derivatives through snap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomain
from .geom import wrap_angle

_T_TOL = 1e-9

YAW_POLICIES = ("fixed", "tangent")


@dataclass
class FlatSample:
    """Flat outputs at one instant: position and 4 derivatives, yaw and 2 derivatives."""

    r0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r2: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r3: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r4: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi: float = 0.0
    psi1: float = 0.0
    psi2: float = 0.0

    def __post_init__(self):
        for name in ("r0", "r1", "r2", "r3", "r4"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    def derivative(self, k):
        return (self.r0, self.r1, self.r2, self.r3, self.r4)[k]


def sigma(t):
    """Smooth-step ``-20t^7 + 70t^6 - 84t^5 + 35t^4`` and its first four derivatives.

    Velocity, acceleration and jerk vanish at both ends; the fourth derivative
    does not (it is 840 at t=0 and -840 at t=1).
    """
    if not (-_T_TOL <= t <= 1.0 + _T_TOL):
        raise OutOfDomain(f"sigma is defined on [0, 1], got {t}")
    t = min(max(t, 0.0), 1.0)
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    s0 = t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    s1 = 140.0 * t3 * (1.0 - t) ** 3
    s2 = t2 * (420.0 + t * (-1680.0 + t * (2100.0 - 840.0 * t)))
    s3 = t * (840.0 + t * (-5040.0 + t * (8400.0 - 4200.0 * t)))
    s4 = 840.0 + t * (-10080.0 + t * (25200.0 - 16800.0 * t))
    return s0, s1, s2, s3, s4


def sigma_T(t, T, sigma_fn=sigma):
    """``T * sigma(t / T)`` with derivatives ``T**(1-n) * sigma^(n)(t / T)``."""
    if not T > 0.0:
        raise OutOfDomain("T must be positive")
    if not (-_T_TOL * T <= t <= T * (1.0 + _T_TOL)):
        raise OutOfDomain(f"t={t} outside [0, {T}]")
    s = sigma_fn(t / T)
    return tuple(T ** (1 - n) * s[n] for n in range(5))


def _compose(f, g):
    """Derivatives 0..4 of f(g(t)) given f^(0..4) at g and g^(0..4) (Faa di Bruno)."""
    g1, g2, g3, g4 = g[1], g[2], g[3], g[4]
    return (
        f[0],
        f[1] * g1,
        f[2] * g1**2 + f[1] * g2,
        f[3] * g1**3 + 3.0 * f[2] * g1 * g2 + f[1] * g3,
        f[4] * g1**4 + 6.0 * f[3] * g1**2 * g2 + f[2] * (3.0 * g2**2 + 4.0 * g1 * g3) + f[1] * g4,
    )


def helix(Omega, t, T, yaw="fixed", sigma_fn=sigma) -> FlatSample:
    """Unit-radius helix ``[cos(W s), sin(W s), 0.1 s]`` with ``s = sigma_T(t)``.

    yaw="fixed" keeps psi = 0; yaw="tangent" points the heading along the
    horizontal velocity (angle + pi/2 for positive Omega).
    """
    if yaw not in YAW_POLICIES:
        raise ValueError(f"unknown yaw policy {yaw!r}")
    s = sigma_T(t, T, sigma_fn)
    th = tuple(Omega * sk for sk in s)
    c, sn = math.cos(th[0]), math.sin(th[0])
    x = _compose((c, -sn, -c, sn, c), th)
    y = _compose((sn, c, -sn, -c, sn), th)
    z = tuple(0.1 * sk for sk in s)
    r = [np.array([x[k], y[k], z[k]]) for k in range(5)]
    psi = psi1 = psi2 = 0.0
    if yaw == "tangent" and Omega != 0.0:
        psi = wrap_angle(th[0] + math.copysign(math.pi / 2.0, Omega))
        psi1, psi2 = th[1], th[2]
    return FlatSample(*r, psi=psi, psi1=psi1, psi2=psi2)


def hover(point=(0.0, 0.0, 0.0), psi=0.0) -> FlatSample:
    return FlatSample(r0=np.array(point, dtype=float), psi=float(psi))


@dataclass(frozen=True)
class TrajectorySpec:
    """Serializable trajectory choice used by the simulator and CLI."""

    kind: str = "helix"
    Omega: float = 0.5
    T: float = 10.0
    yaw: str = "fixed"
    point: tuple = (0.0, 0.0, 0.0)
    psi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("helix", "hover"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.yaw not in YAW_POLICIES:
            raise ValueError(f"unknown yaw policy {self.yaw!r}")
        if not self.T > 0.0:
            raise ValueError("trajectory duration T must be positive")

    def sample(self, t, sigma_fn=sigma) -> FlatSample:
        if self.kind == "hover":
            return hover(self.point, self.psi)
        # the helix holds its end point once t passes T
        return helix(self.Omega, min(max(t, 0.0), self.T), self.T, self.yaw, sigma_fn)

    def to_dict(self):
        return {"kind": self.kind, "Omega": self.Omega, "T": self.T, "yaw": self.yaw,
                "point": list(self.point), "psi": self.psi}
