import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadflat.errors import NonConjugateClosure, WrongOrder
from quadflat.tuning import (
    MELLINGER_ATTITUDE_COMPLEX, MELLINGER_ATTITUDE_REAL, PoleSet, mellinger_gains_from_poles,
    poly_from_poles, settling_time, snap_gains_from_poles, step_response,
)
from quadflat.vehicle import VehicleParams


def test_poly_examples():
    assert poly_from_poles([-10] * 4).tolist() == [40, 600, 4000, 10000]
    assert np.allclose(poly_from_poles([-0.5 + 3j, -0.5 - 3j]), [1, 9.25], atol=1e-12)
    assert poly_from_poles([-1, -1]).tolist() == [2, 1]


def test_poly_matches_numpy_poly():
    poles = [-1, -2.5, -0.3 + 1j, -0.3 - 1j, -7]
    assert np.allclose(poly_from_poles(poles), np.poly(poles).real[1:], rtol=1e-13)


def test_poles_must_be_stable_and_closed():
    with pytest.raises(ValueError):
        PoleSet([-1, 0.5])
    with pytest.raises(ValueError):
        PoleSet([0.0, -1])
    with pytest.raises(NonConjugateClosure):
        PoleSet([-1 + 2j, -1 - 3j])


@st.composite
def pole_sets(draw):
    n_real = draw(st.integers(0, 3))
    n_pair = draw(st.integers(0 if n_real else 1, 2))
    re = st.floats(-12, -0.1)
    poles = [complex(draw(re)) for _ in range(n_real)]
    for _ in range(n_pair):
        a, b = draw(re), draw(st.floats(0.1, 6))
        poles += [complex(a, b), complex(a, -b)]
    return poles


@given(pole_sets())
def test_coefficients_real_and_roots_round_trip(poles):
    c = poly_from_poles(poles)
    assert c.dtype == float and len(c) == len(poles)
    full = np.r_[1.0, c]
    for p in poles:
        scale = np.polyval(np.abs(full), abs(p))
        assert abs(np.polyval(full, p)) <= 1e-11 * scale
    # and the roots come back when they are well separated
    if len(set(np.round(poles, 3))) == len(poles) and len(poles) <= 3:
        roots = np.roots(full)
        for p in poles:
            assert np.min(np.abs(roots - p)) < 1e-6


def test_snap_gain_examples():
    g = snap_gains_from_poles()
    assert (g.K1, g.K2, g.K3, g.K4, g.K5, g.K6) == (40, 600, 4000, 10000, 20, 100)
    g = snap_gains_from_poles([-1] * 4, [-10, -10])
    assert (g.K1, g.K2, g.K3, g.K4) == (4, 6, 4, 1)
    g = snap_gains_from_poles([-1, -2, -3, -4], [-10, -10])
    assert (g.K1, g.K2, g.K3, g.K4) == (10, 35, 50, 24)
    with pytest.raises(WrongOrder):
        snap_gains_from_poles([-1, -1], [-1, -1])


def test_mellinger_gain_examples():
    P = VehicleParams()
    g = mellinger_gains_from_poles()
    assert np.allclose(g.Kp, 5.0) and np.allclose(g.Kv, 12.5)
    assert np.allclose(g.Komega, 1.0) and np.allclose(g.KR, 9.25)
    g = mellinger_gains_from_poles(attitude=MELLINGER_ATTITUDE_REAL, attitude_scaling="inertia")
    assert np.allclose(g.Komega, P.J_diag * 2) and np.allclose(g.KR, P.J_diag * 1)
    g = mellinger_gains_from_poles(attitude_scaling="inertia")
    assert np.allclose(g.Komega, P.J_diag * 1) and np.allclose(g.KR, P.J_diag * 9.25)
    with pytest.raises(WrongOrder):
        mellinger_gains_from_poles([-5, -5, -5], MELLINGER_ATTITUDE_COMPLEX)
    with pytest.raises(ValueError):
        mellinger_gains_from_poles(attitude_scaling="bogus")


def test_pole_string_parsing():
    assert PoleSet.parse("-1,-1") == PoleSet([-1, -1])
    assert PoleSet.parse("-0.5+3j, -0.5-3j") == PoleSet([-0.5 + 3j, -0.5 - 3j])
    assert PoleSet.parse("-2+j,-2-j") == PoleSet([-2 + 1j, -2 - 1j])
    assert str(PoleSet.parse("-0.5+3j,-0.5-3j")) == "-0.5+3j,-0.5-3j"
    for bad in ("", "-1,,-1", "abc", "-1+3", "1e"):
        with pytest.raises(ValueError):
            PoleSet.parse(bad)


def test_step_response_critically_damped():
    t, y, _ = step_response([-1, -1])
    assert y[1000] == pytest.approx(2 / math.e, abs=1e-9)
    assert np.allclose(y, (1 + t) * np.exp(-t), atol=1e-10)


def test_step_response_underdamped():
    t, y, _ = step_response([-0.5 + 3j, -0.5 - 3j])
    assert y[0] == 1.0
    ref = np.exp(-t / 2) * (np.cos(3 * t) + np.sin(3 * t) / 6)
    assert np.allclose(y, ref, atol=1e-9)


def test_cumulative_mean_is_running_average():
    _, y, cum = step_response([-2, -3], duration=1.0, dt=0.01)
    assert cum[0] == y[0]
    assert cum[50] == pytest.approx(np.mean(y[:51]))


def test_cumulative_mean_vanishes_with_long_horizon():
    _, _, cum = step_response([-1, -1], duration=400.0, dt=0.01)
    assert abs(cum[-1]) < 0.01


def test_settling_time_definition():
    t = np.arange(6.0)
    assert settling_time(t, np.array([1, 0.5, 0.05, 0.2, 0.05, 0.0])) == 4.0
    assert settling_time(t, np.zeros(6)) == 0.0
    assert math.isinf(settling_time(t, np.full(6, 0.2)))


def test_complex_poles_settle_faster():
    t, _, cum_c = step_response(MELLINGER_ATTITUDE_COMPLEX)
    _, _, cum_r = step_response(MELLINGER_ATTITUDE_REAL)
    assert settling_time(t, cum_c) < settling_time(t, cum_r)
