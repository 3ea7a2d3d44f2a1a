"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_backends.py [--steps 20000] [--repeat 3]

Times a bare RK4 loop, the mixer round trip, and a full 10 s helix
simulation under each backend, and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from quadflat import _backend, _kernels_py
from quadflat.sim import closed_loop, max_tracking_error, preset
from quadflat.vehicle import VehicleParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def rk4_loop(k, steps):
    P = VehicleParams()
    y = np.zeros(18)
    y[6:15] = np.eye(3).ravel()
    y[15:] = (0.3, -0.2, 0.1)
    tau = np.array([1e-3, -2e-3, 5e-4])
    for _ in range(steps):
        y = k.rk4_step(y, 5.0, tau, P.m, P.g, P.Jx, P.Jy, P.Jz, 0.01)
    return y


def mixer_loop(k, steps):
    P = VehicleParams()
    tau = np.array([0.01, -0.02, 0.003])
    s = None
    for n in range(steps):
        s, _ = k.mixer_inverse(4.0 + 1e-4 * n, tau, P.kF, P.kM, P.L, P.s_max)
        k.mixer_forward(s * s, P.kF, P.kM, P.L)
    return s


def helix_run(k):
    saved = _backend.kernels
    _backend.kernels = k
    try:
        return closed_loop(preset("snap"))
    finally:
        _backend.kernels = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = {"python": _kernels_py}
    if _backend.compiled is not None:
        backends["cython"] = _backend.compiled
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, k in backends.items():
        t_rk4, y = best_of(lambda: rk4_loop(k, args.steps), args.repeat)
        t_mix, s = best_of(lambda: mixer_loop(k, args.steps), args.repeat)
        t_sim, log = best_of(lambda: helix_run(k), args.repeat)
        results[name] = (t_rk4, t_mix, t_sim, y, s, log)
        print(f"{name:7s} rk4 {args.steps} steps {t_rk4 * 1e3:8.1f} ms | "
              f"mixer {args.steps} round trips {t_mix * 1e3:8.1f} ms | "
              f"helix sim {t_sim * 1e3:7.1f} ms (delta {max_tracking_error(log):.3e})")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speed-up: rk4 x{py[0] / cy[0]:.1f}, mixer x{py[1] / cy[1]:.1f}, "
              f"helix sim x{py[2] / cy[2]:.2f}")
        print(f"max |state difference| after rk4 loop: {np.max(np.abs(py[3] - cy[3])):.2e}")
        print(f"max |rotor speed difference|: {np.max(np.abs(py[4] - cy[4])):.2e}")
        print(f"max |log difference| over helix run: {np.max(np.abs(py[5].rows - cy[5].rows)):.2e}")


if __name__ == "__main__":
    main()
