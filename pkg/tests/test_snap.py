import math

import numpy as np
import pytest

from quadflat.flatness import feedforward
from quadflat.geom import rot_x, rot_z
from quadflat.sim import closed_loop, max_tracking_error, preset
from quadflat.snap import (
    SnapController, SnapMeasurement, SnapState, estimate_motion, snap_law, snap_output,
    yaw_and_rate,
)
from quadflat.trajectories import FlatSample, TrajectorySpec, helix
from quadflat.tuning import snap_gains_from_poles
from quadflat.vehicle import RigidState, VehicleParams

P = VehicleParams()
MG = P.m * P.g
GAINS = snap_gains_from_poles()


def test_estimate_motion_at_hover():
    r2, r3 = estimate_motion(RigidState(), SnapState.hover(P), P)
    assert np.allclose(r2, 0, atol=1e-15) and np.array_equal(r3, np.zeros(3))


def test_estimate_motion_double_thrust():
    r2, _ = estimate_motion(RigidState(), SnapState(2 * MG, 0.0), P)
    assert np.allclose(r2, [0, 0, P.g])


def test_jerk_from_roll_rate_matches_rotating_thrust_axis():
    # positive roll rate tips k_B toward -y, so the thrust-driven jerk points along -y
    r2, r3 = estimate_motion(RigidState(omega=np.array([1.0, 0.0, 0.0])), SnapState(MG, 0.0), P)
    assert np.allclose(r3, [0.0, -9.81, 0.0])
    h = 1e-6
    acc = lambda a: MG * rot_x(a)[:, 2] / P.m
    assert np.allclose((acc(h) - acc(-h)) / (2 * h), r3, atol=1e-6)


def test_yaw_and_rate_examples():
    assert yaw_and_rate(np.eye(3), np.array([0.0, 0.0, 1.0])) == (0.0, 1.0)
    assert yaw_and_rate(np.eye(3), np.array([1.0, 0.0, 0.0])) == (0.0, 0.0)
    psi, psi1 = yaw_and_rate(rot_z(math.pi / 2), np.array([0.0, 0.0, 2.0]))
    assert psi == pytest.approx(math.pi / 2) and psi1 == pytest.approx(2.0)


def test_yaw_rate_matches_finite_difference_when_tilted():
    R0 = rot_z(0.3) @ rot_x(0.4)
    w = np.array([0.5, -0.3, 0.8])
    from quadflat.geom import exp_so3, heading_of, yaw_of
    h = 1e-6
    yaw = lambda s: yaw_of(heading_of(R0 @ exp_so3(w * s)))
    _, psi1 = yaw_and_rate(R0, w)
    assert psi1 == pytest.approx((yaw(h) - yaw(-h)) / (2 * h), abs=1e-7)


def meas(**kw):
    base = dict(r=np.zeros(3), v=np.zeros(3), r2=np.zeros(3), r3=np.zeros(3), psi=0.0, psi1=0.0)
    base.update(kw)
    return SnapMeasurement(**base)


def test_snap_law_examples():
    r4, psi2 = snap_law(meas(), FlatSample(), GAINS)
    assert np.array_equal(r4, np.zeros(3)) and psi2 == 0.0
    r4, _ = snap_law(meas(r=np.array([1.0, 0, 0])), FlatSample(), GAINS)
    assert np.array_equal(r4, [-10000.0, 0, 0])
    _, psi2 = snap_law(meas(psi=0.1), FlatSample(), GAINS)
    assert psi2 == pytest.approx(-10.0)


def test_snap_law_wraps_yaw_error():
    _, psi2 = snap_law(meas(psi=math.pi - 0.01), FlatSample(psi=-math.pi + 0.01), GAINS)
    assert psi2 == pytest.approx(-GAINS.K6 * -0.02)


def test_snap_law_feedforward_flag_adds_reference():
    ref = FlatSample(r4=np.array([1.0, 2.0, 3.0]), psi2=0.5)
    r4, psi2 = snap_law(meas(), ref, GAINS, feedforward=True)
    assert np.array_equal(r4, [1.0, 2.0, 3.0]) and psi2 == 0.5
    r4, psi2 = snap_law(meas(), ref, GAINS)
    assert np.array_equal(r4, np.zeros(3)) and psi2 == 0.0


def test_snap_output_hover_keeps_state():
    cmd, st, p2 = snap_output(np.zeros(3), 0.0, RigidState(), SnapState.hover(P), P, 0.01)
    assert cmd.p == MG and np.allclose(cmd.tau, 0.0) and p2 == 0.0
    assert st == SnapState.hover(P)


def test_snap_output_integrates_thrust_semi_implicitly():
    cmd, st, p2 = snap_output(np.array([0, 0, 4.0]), 0.0, RigidState(), SnapState.hover(P), P, 0.01)
    assert p2 == pytest.approx(2.0)
    assert st.p1 == pytest.approx(0.02)
    assert st.p == pytest.approx(4.9052, abs=1e-12)
    # the thrust sent now is the stored value for this instant
    assert cmd.p == MG


def test_snap_output_yaw_acceleration_torque():
    cmd, _, _ = snap_output(np.zeros(3), 1.0, RigidState(), SnapState.hover(P), P, 0.01)
    assert np.allclose(cmd.tau, [0, 0, 0.0264])


def test_pinned_helix_commands_equal_feedforward():
    ctrl = SnapController(GAINS, P, 0.01, feedforward=True)
    for t in np.linspace(0.0, 10.0, 101):
        ref = helix(0.5, t, 10.0)
        ff = feedforward(ref, P)
        ctrl.reset(SnapState(ff.p, ff.p1))
        cmd = ctrl.command(RigidState(ref.r0, ref.r1, ff.R, ff.omega), ref)
        assert abs(cmd.p - ff.p) <= 1e-6
        assert np.max(np.abs(cmd.tau - ff.tau)) <= 1e-6
        assert ctrl.last_p2 == pytest.approx(ff.p2, abs=1e-9)


def test_closed_loop_hover_holds():
    log = closed_loop(preset("snap", trajectory=TrajectorySpec(kind="hover", point=(0, 0, 1))))
    assert log.status == "completed" and max_tracking_error(log) < 1e-3


def test_closed_loop_recovers_from_offset():
    cfg = preset("snap", trajectory=TrajectorySpec(kind="hover"))
    log = closed_loop(cfg, RigidState(r=np.array([0.05, -0.05, 0.02])))
    assert log.status == "completed"
    assert np.linalg.norm(log.r[-1]) < 1e-4
