import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadflat import _backend, _kernels_py
from quadflat.geom import exp_so3
from quadflat.sim import closed_loop, preset
from quadflat.vehicle import VehicleParams

compiled = _backend.compiled
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")
P = VehicleParams()
PHYS = (P.m, P.g, P.Jx, P.Jy, P.Jz)

vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.array)


def packed(r, v, w_rot, omega):
    y = np.empty(18)
    y[0:3], y[3:6], y[6:15], y[15:18] = r, v, exp_so3(w_rot).ravel(), omega
    return y


@needs_compiled
@given(vec3, vec3, vec3, vec3, st.floats(0, 20), vec3)
def test_rk4_step_agrees(r, v, w_rot, omega, p, tau):
    y = packed(r, v, w_rot, omega)
    tau = tau * 0.01
    a = _kernels_py.rk4_step(y, p, tau, *PHYS, 0.01)
    b = compiled.rk4_step(y, p, tau, *PHYS, 0.01)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_compiled
@given(st.floats(0, 40), st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3),
       st.sampled_from([400.0, 250.0, float("inf")]))
def test_mixer_agrees(p, tau, s_max):
    tau = np.array(tau)
    sa, fa = _kernels_py.mixer_inverse(p, tau, P.kF, P.kM, P.L, s_max)
    sb, fb = compiled.mixer_inverse(p, tau, P.kF, P.kM, P.L, s_max)
    assert np.allclose(sa, sb, rtol=1e-14, atol=0)
    assert np.array_equal(np.asarray(fa, bool), np.asarray(fb, bool))
    pa, ta = _kernels_py.mixer_forward(sa**2, P.kF, P.kM, P.L)
    pb, tb = compiled.mixer_forward(sb**2, P.kF, P.kM, P.L)
    assert pa == pytest.approx(pb, rel=1e-14) and np.allclose(ta, tb, rtol=1e-13, atol=1e-18)


@needs_compiled
def test_full_simulation_agrees():
    saved = _backend.kernels
    try:
        _backend.kernels = _kernels_py
        a = closed_loop(preset("snap", duration=3.0))
        _backend.kernels = compiled
        b = closed_loop(preset("snap", duration=3.0))
    finally:
        _backend.kernels = saved
    assert np.allclose(a.rows, b.rows, rtol=1e-9, atol=1e-9)


def test_fallback_selected_by_environment():
    env = dict(os.environ, QUADFLAT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import quadflat; print(quadflat.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
