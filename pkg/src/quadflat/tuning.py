"""Pole-placement gain synthesis and step-response comparison of pole types."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import NonConjugateClosure, WrongOrder
from .vehicle import VehicleParams

CONJ_TOL = 1e-12

SNAP_POSITION_POLES = (-10.0, -10.0, -10.0, -10.0)
SNAP_YAW_POLES = (-10.0, -10.0)
MELLINGER_POSITION_POLES = (-5.0, -5.0)
MELLINGER_ATTITUDE_REAL = (-1.0, -1.0)
MELLINGER_ATTITUDE_COMPLEX = (-0.5 + 3j, -0.5 - 3j)

_POLE_RE = re.compile(r"^([+-]?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|[+-]?\.\d+(?:[eE][+-]?\d+)?)"
                      r"(?:([+-])(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+)?j)?$")


class PoleSet(tuple):
    """Conjugate-closed tuple of strictly stable poles."""

    def __new__(cls, poles):
        poles = tuple(complex(p) for p in poles)
        if not poles:
            raise ValueError("pole set is empty")
        for p in poles:
            if not p.real < 0.0:
                raise ValueError(f"pole {p} is not in the open left half plane")
        unmatched = [p for p in poles if abs(p.imag) > CONJ_TOL]
        while unmatched:
            p = unmatched.pop()
            for n, q in enumerate(unmatched):
                if abs(q - p.conjugate()) <= CONJ_TOL * max(1.0, abs(p)):
                    del unmatched[n]
                    break
            else:
                raise NonConjugateClosure(f"pole {p} has no conjugate partner")
        return super().__new__(cls, poles)

    @classmethod
    def parse(cls, text):
        """Parse ``"-1,-1"`` or ``"-0.5+3j,-0.5-3j"``."""
        poles = []
        for item in text.split(","):
            item = item.strip().replace(" ", "")
            m = _POLE_RE.match(item)
            if not item or m is None:
                raise ValueError(f"malformed pole {item!r}")
            re_part = float(m.group(1))
            im = 0.0
            if m.group(2):
                im = float(m.group(3) or 1.0) * (1.0 if m.group(2) == "+" else -1.0)
            poles.append(complex(re_part, im))
        return cls(poles)

    def __str__(self):
        out = []
        for p in self:
            if p.imag == 0.0:
                out.append(f"{p.real:g}")
            else:
                out.append(f"{p.real:g}{p.imag:+g}j")
        return ",".join(out)


def poly_from_poles(poles) -> np.ndarray:
    """Coefficients of prod(s - p_i), descending, without the leading 1."""
    poles = poles if isinstance(poles, PoleSet) else PoleSet(poles)
    c = np.array([1.0 + 0.0j])
    for p in poles:
        c = np.append(c, 0.0) - p * np.insert(c, 0, 0.0)
    if np.any(np.abs(c.imag) > CONJ_TOL * np.maximum(1.0, np.abs(c.real))):
        raise NonConjugateClosure("polynomial has non-negligible imaginary part")
    return c.real[1:].copy()


@dataclass(frozen=True)
class SnapGains:
    """Snap error-dynamics gains: K1 on jerk ... K4 on position; K5 yaw rate, K6 yaw."""

    K1: float
    K2: float
    K3: float
    K4: float
    K5: float
    K6: float


@dataclass(frozen=True)
class MellingerGains:
    """Per-axis diagonal gains.

    The names follow the force law as printed: ``Kp`` multiplies the
    *velocity* error and ``Kv`` the *position* error.
    """

    Kp: np.ndarray
    Kv: np.ndarray
    KR: np.ndarray
    Komega: np.ndarray


def snap_gains_from_poles(position=SNAP_POSITION_POLES, yaw=SNAP_YAW_POLES) -> SnapGains:
    position, yaw = PoleSet(position), PoleSet(yaw)
    if len(position) != 4 or len(yaw) != 2:
        raise WrongOrder("Snap needs 4 position poles and 2 yaw poles")
    k1, k2, k3, k4 = poly_from_poles(position)
    k5, k6 = poly_from_poles(yaw)
    return SnapGains(k1, k2, k3, k4, k5, k6)


ATTITUDE_SCALINGS = ("unit", "inertia")


def mellinger_gains_from_poles(position=MELLINGER_POSITION_POLES,
                               attitude=MELLINGER_ATTITUDE_COMPLEX,
                               params: VehicleParams | None = None,
                               attitude_scaling="unit") -> MellingerGains:
    """Gains from ``s^2 + c1 s + c0`` for each sub-loop.

    Position loop: ``Kp = m c1`` (velocity), ``Kv = m c0`` (position), which
    places the translational error poles exactly.

    Attitude loop: with ``attitude_scaling="unit"`` the coefficients are used
    as torque gains directly (``K_omega = c1``, ``K_R = c0``); ``"inertia"``
    multiplies them by the axis inertia instead. The inertia-scaled variant
    puts the attitude loop slower than the position loop it serves and the
    cascade does not hold hover with the default pole sets.
    """
    params = params or VehicleParams()
    position, attitude = PoleSet(position), PoleSet(attitude)
    if len(position) != 2 or len(attitude) != 2:
        raise WrongOrder("Mellinger needs 2 position poles and 2 attitude poles")
    if attitude_scaling not in ATTITUDE_SCALINGS:
        raise ValueError(f"unknown attitude scaling {attitude_scaling!r}")
    c1, c0 = poly_from_poles(position)
    a1, a0 = poly_from_poles(attitude)
    scale = params.J_diag if attitude_scaling == "inertia" else np.ones(3)
    return MellingerGains(
        Kp=np.full(3, params.m * c1),
        Kv=np.full(3, params.m * c0),
        KR=scale * a0,
        Komega=scale * a1,
    )


def step_response(poles, duration=10.0, dt=1e-3):
    """Integrate ``y'' + c1 y' + c0 y = 0`` from ``y=1, y'=0`` with RK4.

    Returns ``(t, y, cumulative_mean)`` arrays; the cumulative mean is the
    running average of the samples ``y[0..k]``.
    """
    poles = PoleSet(poles)
    if len(poles) != 2:
        raise WrongOrder("step response needs exactly 2 poles")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    c1, c0 = poly_from_poles(poles)
    n = int(round(duration / dt))
    t = np.arange(n + 1) * dt
    y = np.empty(n + 1)
    x = np.array([1.0, 0.0])
    A = np.array([[0.0, 1.0], [-c0, -c1]])
    y[0] = x[0]
    for k in range(n):
        k1 = A @ x
        k2 = A @ (x + 0.5 * dt * k1)
        k3 = A @ (x + 0.5 * dt * k2)
        k4 = A @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[k + 1] = x[0]
    cum = np.cumsum(y) / np.arange(1, n + 2)
    return t, y, cum


def settling_time(t, values, band=0.1):
    """First time after which ``|values|`` stays below `band`; inf if never."""
    outside = np.nonzero(np.abs(values) >= band)[0]
    if outside.size == 0:
        return float(t[0])
    last = outside[-1]
    if last + 1 >= len(t):
        return float("inf")
    return float(t[last + 1])
