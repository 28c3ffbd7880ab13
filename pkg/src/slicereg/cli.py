"""Command-line interface: phantom generation, single registrations, and the
two benchmark protocols."""

import argparse
import glob
import json
import logging
import math
import os
import sys

from .harness import DEFAULT_METHODS, PhantomSpec, generate_phantom, \
    run_individual, run_temporal, write_csv
from .imgcore import ImageGrid2, Volume3, load_metaimage, save_metaimage
from .matching import mad
from .optim import Schedule, default_schedule, register
from .rigid import RigidParams, SliceGeometry, resample_slice


def _parse_floats(text, n=None):
    values = tuple(float(v) for v in text.split(","))
    if n is not None and len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated values")
    return values


def _parse_ints(text, n=None):
    values = tuple(int(v) for v in text.split(","))
    if n is not None and len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated values")
    return values


def _add_schedule_flags(parser):
    parser.add_argument("--levels", type=int, default=4)
    parser.add_argument("--kappa", type=int, default=2)
    parser.add_argument("--omega-rot", type=_parse_floats, default=None,
                        metavar="LIST", help="per-level rotation bounds, rad")
    parser.add_argument("--omega-trans", type=_parse_floats, default=None,
                        metavar="LIST", help="per-level translation bounds, mm")
    parser.add_argument("--alpha", type=_parse_floats, default=None,
                        metavar="LIST", help="per-level decay factors")
    parser.add_argument("--max-iters", type=_parse_ints, default=None,
                        metavar="LIST", help="per-level iteration caps")


def _build_schedule(args):
    base = default_schedule()
    levels = args.levels
    if (levels == base.num_levels and args.omega_rot is None
            and args.omega_trans is None and args.alpha is None
            and args.max_iters is None and args.kappa == base.kappa):
        return base

    def pick(value, default):
        if value is None:
            # Truncate or extend the defaults to the requested level count.
            if levels <= len(default):
                return tuple(default[:levels])
            return tuple(default) + (default[-1],) * (levels - len(default))
        return tuple(value)

    return Schedule(num_levels=levels,
                    omega_rot=pick(args.omega_rot, base.omega_rot),
                    omega_trans=pick(args.omega_trans, base.omega_trans),
                    alpha=pick(args.alpha, base.alpha),
                    max_iters=pick(args.max_iters, base.max_iters),
                    kappa=args.kappa)


def _cmd_phantom(args):
    spec = PhantomSpec(dims=args.dims, spacing=args.spacing,
                       num_frames=args.frames, beat_amplitude=args.beat,
                       noise_sigma=args.noise, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    frames = generate_phantom(spec)
    for t, frame in enumerate(frames):
        save_metaimage(frame, os.path.join(args.out, f"frame_{t:03d}.mhd"))
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _load_frames(directory):
    paths = sorted(glob.glob(os.path.join(directory, "frame_*.mhd")))
    if not paths:
        raise SystemExit(f"no frame_*.mhd files in {directory}")
    frames = [load_metaimage(p) for p in paths]
    for p, f in zip(paths, frames):
        if not isinstance(f, Volume3):
            raise SystemExit(f"{p} is not a 3D volume")
    return frames


def _cmd_register(args):
    moving = load_metaimage(args.moving)
    fixed = load_metaimage(args.fixed)
    if not isinstance(moving, ImageGrid2):
        raise SystemExit("--moving must be a 2D image")
    if not isinstance(fixed, Volume3):
        raise SystemExit("--fixed must be a 3D volume")
    geom = SliceGeometry(moving.dims, moving.spacing)
    init = RigidParams(*args.init)
    schedule = _build_schedule(args)
    result = register(args.method, moving, fixed, init, geom, schedule,
                      args.criterion)
    final = result.final_params
    payload = {
        "method": args.method,
        "seed": args.seed,
        "init_rx": init.rx, "init_ry": init.ry, "init_rz": init.rz,
        "init_tx": init.tx, "init_ty": init.ty, "init_tz": init.tz,
        "final_rx": final.rx, "final_ry": final.ry, "final_rz": final.rz,
        "final_tx": final.tx, "final_ty": final.ty, "final_tz": final.tz,
        "final_cost": result.final_cost,
        "init_mad": mad(moving, resample_slice(fixed, init, geom)),
        "final_mad": mad(moving, resample_slice(fixed, final, geom)),
        "cost_evals": result.num_cost_evaluations,
        "wall_time_s": result.wall_time,
        "trace": [[level, iteration, cost]
                  for level, iteration, cost in result.cost_trace],
    }
    with open(args.out, "w", encoding="ascii") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    print(f"{args.method}: cost {result.final_cost:.6g}, "
          f"{result.num_cost_evaluations} evaluations, "
          f"{result.wall_time:.1f} s -> {args.out}")
    return 0


def _parse_methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in methods:
        if m not in DEFAULT_METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m}")
    return methods


def _cmd_bench_individual(args):
    frames = _load_frames(args.phantom)
    records = run_individual(frames, schedule=_build_schedule(args),
                             num_slices=args.slices, methods=args.methods,
                             seed=args.seed, jobs=args.jobs)
    write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_bench_temporal(args):
    frames = _load_frames(args.phantom)
    records = run_temporal(frames, schedule=_build_schedule(args),
                           sigma_rot=math.radians(args.sigma_rot_deg),
                           sigma_trans=args.sigma_trans, methods=args.methods,
                           seed=args.seed, jobs=args.jobs)
    write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slicereg",
        description="Rigid slice-to-volume registration toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic frame sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--dims", type=lambda s: _parse_ints(s, 3),
                   default=(192, 192, 11), metavar="NX,NY,NZ")
    p.add_argument("--spacing", type=lambda s: _parse_floats(s, 3),
                   default=(1.25, 1.25, 8.0), metavar="SX,SY,SZ")
    p.add_argument("--beat", type=float, default=0.08)
    p.add_argument("--noise", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("register", help="register one slice to one volume")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--method", required=True,
                   choices=("simplex", "discrete", "refined"))
    p.add_argument("--init", type=lambda s: _parse_floats(s, 6),
                   default=(0.0,) * 6, metavar="RX,RY,RZ,TX,TY,TZ")
    p.add_argument("--criterion", choices=("ssd", "sad"), default="ssd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("bench-individual", help="independent-cases benchmark")
    p.add_argument("--phantom", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--slices", type=int, default=100)
    p.add_argument("--methods", type=_parse_methods, default=DEFAULT_METHODS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_bench_individual)

    p = sub.add_parser("bench-temporal", help="chained-series benchmark")
    p.add_argument("--phantom", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma-rot-deg", type=float, default=3.0)
    p.add_argument("--sigma-trans", type=float, default=5.0)
    p.add_argument("--methods", type=_parse_methods, default=DEFAULT_METHODS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_schedule_flags(p)
    p.set_defaults(func=_cmd_bench_temporal)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
