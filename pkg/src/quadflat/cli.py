"""Command-line front end.

Exit codes: 0 ok, 1 configuration error, 2 diverged, 3 invariant breach.
Every command writes a JSON manifest next to its main artifact.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import BACKEND, __version__
from .errors import QuadflatError, UnsafeTransform
from .flatness import FD_TOLERANCES, finite_difference_residuals
from .formation import FormationConfig, run_formation
from .sim import (
    COMPLETED,
    SimConfig,
    closed_loop,
    detect_breaking_point,
    max_tracking_error,
    saturation_events,
    sweep,
    write_sweep_csv,
)
from .trajectories import TrajectorySpec, sigma
from .tuning import PoleSet, settling_time, step_response
from .vehicle import VehicleParams

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _poles(text):
    try:
        return PoleSet.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_traj_flags(p):
    p.add_argument("--traj", choices=("helix", "hover"), default="helix")
    p.add_argument("--omega", type=_float, default=0.5, help="helix angular rate (rad/s)")
    p.add_argument("--T", type=_float, default=10.0, help="helix duration parameter (s)")
    p.add_argument("--yaw-policy", choices=("fixed", "tangent"), default="fixed")
    p.add_argument("--params", help="vehicle parameter JSON")
    p.add_argument("--s-max", type=_float, help="override max rotor speed (inf disables the cap)")


def _add_sim_flags(p, controller_required=True):
    _add_traj_flags(p)
    p.add_argument("--controller", choices=("snap", "mellinger"), required=controller_required,
                   default=None if controller_required else "snap")
    p.add_argument("--duration", type=_float, default=10.0)
    p.add_argument("--dt", type=_float, default=0.01)
    p.add_argument("--poles-pos", type=_poles)
    p.add_argument("--poles-att", type=_poles)
    p.add_argument("--poles-yaw", type=_poles)
    p.add_argument("--feedforward", action="store_true",
                   help="add reference feedforward (snap and yaw acceleration for Snap, "
                        "reference torque for Mellinger)")
    p.add_argument("--attitude-scaling", choices=("unit", "inertia"), default="unit")


def _params(args):
    params = VehicleParams.from_json(args.params) if args.params else VehicleParams()
    if args.s_max is not None:
        params = params.with_s_max(args.s_max)
    return params


def _trajectory(args):
    return TrajectorySpec(kind=args.traj, Omega=args.omega, T=args.T, yaw=args.yaw_policy)


def _sim_config(args):
    return SimConfig(
        controller=args.controller,
        trajectory=_trajectory(args),
        poles_pos=args.poles_pos,
        poles_att=args.poles_att,
        poles_yaw=args.poles_yaw,
        params=_params(args),
        dt=args.dt,
        duration=args.duration,
        feedforward=args.feedforward,
        attitude_scaling=args.attitude_scaling,
    )


def _manifest_path(artifact):
    root, _ = os.path.splitext(artifact)
    return root + ".manifest.json"


def _write_manifest(path, command, config, artifacts, started, **extra):
    doc = {
        "command": command,
        "version": __version__,
        "backend": BACKEND,
        "config": config,
        "artifacts": artifacts,
        "wall_clock_s": time.perf_counter() - started,
        **extra,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats by strings so the manifest stays strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def cmd_sim(args, started):
    config = _sim_config(args)
    log = closed_loop(config)
    log.to_csv(args.out)
    delta = max_tracking_error(log)
    n_sat, t_sat = saturation_events(log)
    summary = {"status": log.status, "delta": delta, "rows": len(log),
               "saturated_rows": n_sat, "first_saturation_time": t_sat,
               "divergence_time": log.divergence_time}
    _write_manifest(_manifest_path(args.out), "sim", _clean(config.to_dict()),
                    [args.out], started, summary=_clean(summary))
    print(f"{log.status}: delta={delta:.6g} m, rows={len(log)}, saturated rows={n_sat}")
    return EXIT_OK if log.status == COMPLETED else EXIT_DIVERGED


def cmd_sweep(args, started):
    config = _sim_config(args)
    rows = sweep(config, args.omega_min, args.omega_max, args.omega_step, jobs=args.jobs)
    write_sweep_csv(rows, args.out)
    star = detect_breaking_point(rows)
    echo = _clean({**config.to_dict(), "omega_min": args.omega_min,
                   "omega_max": args.omega_max, "omega_step": args.omega_step})
    _write_manifest(_manifest_path(args.out), "sweep", echo, [args.out], started,
                    summary={"rows": len(rows), "breaking_point": star})
    for r in rows:
        print(f"Omega={r.Omega:<4g} delta={r.delta:.6g} {r.status}")
    print(f"breaking point: {star if star is not None else 'none'}")
    return EXIT_OK


def _corrupted_sigma(t):
    s = list(sigma(t))
    s[2] *= 1.01
    return tuple(s)


def cmd_flatness_check(args, started):
    spec = _trajectory(args)
    params = _params(args)
    sigma_fn = _corrupted_sigma if args.inject_fault else sigma
    margin = 0.01 * spec.T
    times = np.linspace(margin, spec.T - margin, args.samples)
    res = finite_difference_residuals(lambda t: spec.sample(t, sigma_fn), times, params)
    failed = sorted(k for k, v in res.items() if not v <= FD_TOLERANCES[k])
    for k in sorted(res):
        flag = "FAIL" if k in failed else "ok"
        print(f"{k:12s} {res[k]:.3e}  (tol {FD_TOLERANCES[k]:.0e}) {flag}")
    with open(args.out, "w") as fh:
        json.dump({"residuals": res, "tolerances": FD_TOLERANCES, "failed": failed}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    echo = {"trajectory": spec.to_dict(), "params": params.to_dict(), "samples": args.samples,
            "inject_fault": args.inject_fault}
    _write_manifest(_manifest_path(args.out), "flatness-check", echo, [args.out], started)
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_step_response(args, started):
    t, y, cum = step_response(args.poles, args.duration, args.dt)
    with open(args.out, "w") as fh:
        fh.write("t,y,cumulative_mean\n")
        for row in zip(t, y, cum):
            fh.write(",".join(f"{x:.9g}" for x in row) + "\n")
    t_star = settling_time(t, cum, args.band)
    echo = {"poles": str(args.poles), "duration": args.duration, "dt": args.dt, "band": args.band}
    _write_manifest(_manifest_path(args.out), "step-response", echo, [args.out], started,
                    summary=_clean({"settling_time": t_star}))
    print(f"cumulative-mean settling time ({args.band:g} band): {t_star:.6g} s")
    return EXIT_OK


def cmd_formation(args, started):
    config = FormationConfig.from_json(args.config)
    sim = SimConfig(controller=args.controller, params=_params(args), dt=args.dt,
                    duration=args.duration, poles_pos=args.poles_pos, poles_att=args.poles_att,
                    poles_yaw=args.poles_yaw, feedforward=args.feedforward,
                    attitude_scaling=args.attitude_scaling)
    os.makedirs(args.out_dir, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnsafeTransform)
        result = run_formation(config, sim)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    artifacts = []
    for i, log in result.logs.items():
        path = os.path.join(args.out_dir, f"agent_{i}.csv")
        log.to_csv(path)
        artifacts.append(path)
    safety_path = os.path.join(args.out_dir, "safety.csv")
    result.safety_to_csv(safety_path)
    artifacts.append(safety_path)
    echo = {"formation": config.to_dict(), "sim": _clean(sim.to_dict())}
    summary = {"status": result.status, "diverged_agent": result.diverged_agent,
               "unsafe_steps": result.unsafe_count, "first_unsafe_time": result.first_unsafe_time,
               "delta": {str(i): max_tracking_error(log) for i, log in result.logs.items()}}
    _write_manifest(os.path.join(args.out_dir, "manifest.json"), "formation", echo, artifacts,
                    started, summary=summary)
    print(f"{result.status}: unsafe steps={result.unsafe_count}")
    return EXIT_OK if result.status == COMPLETED else EXIT_DIVERGED


def build_parser():
    parser = _Parser(prog="quadflat", description="Quadrotor flatness-based control experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sim", help="run one closed-loop simulation")
    _add_sim_flags(p)
    p.add_argument("--out", default="sim.csv")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("sweep", help="helix runs over a grid of Omega")
    _add_sim_flags(p)
    p.add_argument("--omega-min", type=_float, default=0.0)
    p.add_argument("--omega-max", type=_float, default=2.0)
    p.add_argument("--omega-step", type=_float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("flatness-check", help="finite-difference check of the flatness maps")
    _add_traj_flags(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", default="flatness.json")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_flatness_check)

    p = sub.add_parser("step-response", help="second-order decay for a pole pair")
    p.add_argument("--poles", type=_poles, default=PoleSet.parse("-0.5+3j,-0.5-3j"))
    p.add_argument("--duration", type=_float, default=10.0)
    p.add_argument("--dt", type=_float, default=1e-3)
    p.add_argument("--band", type=_float, default=0.1)
    p.add_argument("--out", default="step_response.csv")
    p.set_defaults(func=cmd_step_response)

    p = sub.add_parser("formation", help="leader/follower affine formation")
    p.add_argument("--config", required=True, help="formation JSON")
    _add_sim_flags(p, controller_required=False)
    p.add_argument("--out-dir", default="formation_out")
    p.set_defaults(func=cmd_formation)
    return parser


_POLE_FLAGS = ("--poles", "--poles-pos", "--poles-att", "--poles-yaw")


def _glue_pole_values(argv):
    # "-1,-1" looks like an option to argparse; attach it to its flag instead
    out, it = [], iter(argv)
    for tok in it:
        if tok in _POLE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_pole_values(argv))
    started = time.perf_counter()
    try:
        return args.func(args, started)
    except (QuadflatError, ValueError, OSError) as exc:
        print(f"quadflat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
