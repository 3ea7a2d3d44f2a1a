"""Acceptance criteria, one test per criterion, at the stated tolerances.

A PASS/FAIL line per criterion is printed in the terminal summary
(see conftest.py). Run alone with ``pytest tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from quadflat.cli import main
from quadflat.flatness import (
    FD_TOLERANCES, alpha_from_flat, attitude_from_flat, feedforward, finite_difference_residuals,
    alpha_z_draft, omega_from_flat, omega_z_draft,
)
from quadflat.formation import AffineTransform, Safety, run_formation, safety_margin, tetrahedron_config
from quadflat.mellinger import mellinger_output
from quadflat.sim import (
    COMPLETED, DIVERGED, SimConfig, closed_loop, detect_breaking_point, max_tracking_error, preset,
    saturation_events, sweep,
)
from quadflat.snap import SnapController, SnapState
from quadflat.trajectories import FlatSample, TrajectorySpec, helix
from quadflat.tuning import (
    MELLINGER_ATTITUDE_COMPLEX, MELLINGER_ATTITUDE_REAL, mellinger_gains_from_poles,
    poly_from_poles, settling_time, snap_gains_from_poles, step_response,
)
from quadflat.vehicle import ControlCommand, RigidState, VehicleParams, mixer_forward, mixer_inverse

P = VehicleParams()
CONFIGS = ("snap", "mellinger-complex", "mellinger-real")


@pytest.fixture(scope="module")
def sweeps():
    return {name: sweep(preset(name), 0.0, 2.0, 0.1) for name in CONFIGS}


def test_criterion_01_mixer_round_trip_and_hover_speed():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_p = worst_tau = 0.0
    for _ in range(1000):
        # in range: the four squared speeds all land in [0, s_max^2]
        p0, tau0 = mixer_forward(rng.uniform(0.0, P.s_max, 4) ** 2, P)
        speeds = mixer_inverse(ControlCommand(p0, tau0), P)
        p1, tau1 = mixer_forward(speeds.s**2, P)
        worst_p = max(worst_p, abs(p1 - p0))
        worst_tau = max(worst_tau, float(np.max(np.abs(tau1 - tau0))))
    elapsed = time.perf_counter() - started
    assert worst_p <= 1e-9 and worst_tau <= 1e-9
    assert elapsed < 1.0
    hover = mixer_inverse(ControlCommand(P.m * P.g, np.zeros(3)), P)
    assert np.max(np.abs(hover.s - 202.164)) <= 1e-3, f"hover speed solves to {hover.s[0]:.4f} rad/s"


def random_flat_sample(rng):
    while True:
        r2 = rng.normal(scale=4.0, size=3)
        if r2[2] + P.g > 1.0:
            break
    return FlatSample(np.zeros(3), np.zeros(3), r2, rng.normal(scale=5.0, size=3),
                      rng.normal(scale=20.0, size=3), rng.uniform(-math.pi, math.pi),
                      rng.normal(), rng.normal())


def test_criterion_02_flatness_suite():
    started = time.perf_counter()
    times = np.linspace(0.1, 9.9, 200)
    res = finite_difference_residuals(lambda t: helix(0.5, t, 10.0), times, P)
    assert res["R_omega"] <= 1e-6
    assert res["omega_alpha"] <= 1e-3
    assert res["p_p1"] <= 1e-5 and res["p1_p2"] <= 1e-5

    rng = np.random.default_rng(7)
    worst_w = worst_a = 0.0
    for _ in range(1000):
        s = random_flat_sample(rng)
        R, p = attitude_from_flat(s, P)
        p1, w = omega_from_flat(s, R, p, P)
        _, a = alpha_from_flat(s, R, p, p1, w, P)
        worst_w = max(worst_w, abs(omega_z_draft(s.psi1, w[1], R) - w[2]))
        worst_a = max(worst_a, abs(alpha_z_draft(s.psi2, w, a[1], R) - a[2]))
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    assert worst_w <= 1e-9, f"draft yaw-rate form off by up to {worst_w:.3g}"
    assert worst_a <= 1e-9, f"draft yaw-acceleration form off by up to {worst_a:.3g}"


def test_criterion_03_hover_equilibrium():
    for name in CONFIGS:
        log = closed_loop(preset(name, trajectory=TrajectorySpec(kind="hover"), dt=0.01,
                                 duration=10.0))
        assert log.status == COMPLETED
        assert max_tracking_error(log) < 1e-3, name


def test_criterion_04_helix_tracking_negligible():
    for name in ("snap", "mellinger-complex"):
        started = time.perf_counter()
        log = closed_loop(preset(name, trajectory=TrajectorySpec(Omega=0.5, T=10.0)))
        assert time.perf_counter() - started < 10.0
        assert log.status == COMPLETED and max_tracking_error(log) <= 0.1, name


def test_criterion_05_controller_ordering(sweeps):
    stars = {n: detect_breaking_point(rows) for n, rows in sweeps.items()}
    limit = min(s if s is not None else math.inf for s in stars.values())
    problems = []
    for k, omega in enumerate(r.Omega for r in sweeps["snap"]):
        rows = [sweeps[n][k] for n in CONFIGS]
        if omega >= limit or any(r.status != COMPLETED for r in rows):
            continue
        snap, mc, mr = (r.delta for r in rows)
        if snap > 1.2 * mc:
            problems.append(f"Omega={omega:g}: snap {snap:.3g} > 1.2 x mellinger-complex {mc:.3g}")
        if mc > 1.2 * mr:
            problems.append(f"Omega={omega:g}: mellinger-complex {mc:.3g} > 1.2 x mellinger-real {mr:.3g}")
    for n, rows in sweeps.items():
        stable = [r for r in rows if stars[n] is None or r.Omega < stars[n]]
        for a, b in zip(stable, stable[1:]):
            if b.delta < 0.9 * a.delta:
                problems.append(f"{n}: delta drops {a.delta:.3g} -> {b.delta:.3g} "
                                f"between Omega {a.Omega:g} and {b.Omega:g}")
    assert not problems, "\n".join(problems)


def test_criterion_06_breaking_point_mechanism(sweeps):
    for n, rows in sweeps.items():
        for r in rows:
            if r.status == DIVERGED:
                assert r.first_saturation_time is not None, (n, r.Omega)
                assert r.first_saturation_time < r.divergence_time, (n, r.Omega)
    free = sweep(preset("snap", params=P.with_s_max(math.inf)), 0.0, 2.0, 0.1)
    diverged = [r.Omega for r in free if r.status != COMPLETED]
    assert not diverged, f"unclamped Snap diverged at Omega = {diverged}"


def test_criterion_07_pole_synthesis():
    assert poly_from_poles([-10, -10, -10, -10]).tolist() == [40, 600, 4000, 10000]
    c = poly_from_poles([-0.5 + 3j, -0.5 - 3j])
    assert np.max(np.abs(c - [1.0, 9.25])) <= 1e-12
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = rng.uniform(-10, -0.2, 2)
        w = rng.uniform(0.1, 5)
        poles = [a, b, complex(a, w), complex(a, -w)] if rng.random() < 0.5 else [a, complex(b, w), complex(b, -w)]
        if abs(a - b) < 0.05:
            continue
        roots = np.roots(np.r_[1.0, poly_from_poles(poles)])
        for p in poles:
            assert np.min(np.abs(roots - p)) <= 1e-6


def test_criterion_08_complex_poles_converge_faster():
    t, _, cum_c = step_response(MELLINGER_ATTITUDE_COMPLEX, duration=10.0)
    _, _, cum_r = step_response(MELLINGER_ATTITUDE_REAL, duration=10.0)
    assert settling_time(t, cum_c) < settling_time(t, cum_r)
    dc = max_tracking_error(closed_loop(preset("mellinger-complex", trajectory=TrajectorySpec(Omega=1.0))))
    dr = max_tracking_error(closed_loop(preset("mellinger-real", trajectory=TrajectorySpec(Omega=1.0))))
    assert dc < dr


def test_criterion_09_commands_match_feedforward_on_truth():
    snap = SnapController(snap_gains_from_poles(), P, 0.01, feedforward=True)
    mg = mellinger_gains_from_poles()
    worst = {("snap", "p"): 0.0, ("snap", "tau"): 0.0,
             ("mellinger", "p"): 0.0, ("mellinger", "tau"): 0.0}
    for t in np.linspace(0.0, 10.0, 201):
        ref = helix(0.5, t, 10.0)
        ff = feedforward(ref, P)
        state = RigidState(ref.r0, ref.r1, ff.R, ff.omega)
        snap.reset(SnapState(ff.p, ff.p1))
        for name, cmd in (("snap", snap.command(state, ref)),
                          ("mellinger", mellinger_output(state, ref, mg, P, feedforward=True))):
            worst[name, "p"] = max(worst[name, "p"], abs(cmd.p - ff.p))
            worst[name, "tau"] = max(worst[name, "tau"], float(np.max(np.abs(cmd.tau - ff.tau))))
    over = {k: v for k, v in worst.items() if v > 1e-6}
    assert not over, "commands off feedforward: " + ", ".join(
        f"{c} {q} by {v:.3g}" for (c, q), v in over.items())


def test_criterion_10_formation():
    started = time.perf_counter()
    cfg = tetrahedron_config()
    res = run_formation(cfg, SimConfig(controller="snap"))
    assert res.status == COMPLETED
    for i, log in res.logs.items():
        assert np.max(np.linalg.norm(log.r - cfg.initial(i), axis=1)) <= 1e-3

    moved = tetrahedron_config(AffineTransform("translate", {"offset": [1.0, 0.0, 0.0]}, 10.0))
    res = run_formation(moved, SimConfig(controller="snap"))
    assert res.status == COMPLETED
    bary = np.mean([res.logs[i].r for i in (1, 2, 3, 4)], axis=0)
    assert np.max(np.linalg.norm(res.logs[5].r - bary, axis=1)) <= 2 * 0.1

    lam, thr, ok = safety_margin(2 * np.eye(3), Safety(0.1, 0.15, 1.0))
    assert lam == pytest.approx(2.0) and thr == pytest.approx(0.5) and ok
    assert time.perf_counter() - started < 30.0


def test_criterion_11_cli_outputs_are_byte_identical(tmp_path):
    for cmd, extra in (("sim", ["--omega", "1.2"]), ("sweep", ["--omega-max", "0.5"])):
        outs = []
        for n in range(2):
            out = tmp_path / f"{cmd}{n}.csv"
            main([cmd, "--controller", "mellinger", *extra, "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] and len(outs[0]) > 0
