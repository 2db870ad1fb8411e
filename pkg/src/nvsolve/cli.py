"""Command-line entry point: pendulum runs, output comparison and timing.

Exit status is 0 on success, 1 on solver failure or differing files, and 2
on usage errors.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import sys

from . import bench, pendulum
from .errors import IllegalInputError, SolverError

BUILTINS = {
    "polar": dict(vector="serial"),
    "polar-custom": dict(vector="custom"),
    "polar-threaded": dict(vector="threaded"),
    "polar-dense": dict(vector="serial", linsolver="dense"),
    "polar-custom-dense": dict(vector="custom", linsolver="custom-dense"),
    "cartesian": dict(vector="serial", cartesian=True),
    "cartesian-custom": dict(vector="custom", linsolver="custom-dense", cartesian=True),
}


def _builtin_task(name: str, t_end: float):
    opts = dict(BUILTINS[name])
    cartesian = opts.pop("cartesian", False)
    cfg = pendulum.PendulumConfig(t_end=t_end, **opts)
    run = pendulum.run_cartesian if cartesian else pendulum.run_polar

    def task():
        run(cfg, io.StringIO())

    return task


def _add_run_flags(p, solvers):
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--debug-cols", action="store_true",
                   help="append energy (polar) or rod pull p (Cartesian)")
    p.add_argument("--vector", choices=pendulum.VECTOR_KINDS, default="serial")
    p.add_argument("--linsolver", choices=solvers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvsolve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("pendulum-polar", help="angle form, ODE"), pendulum.POLAR_SOLVERS)
    _add_run_flags(sub.add_parser("pendulum-cartesian", help="Cartesian form, DAE"),
                   pendulum.CARTESIAN_SOLVERS)
    d = sub.add_parser("diff", help="byte comparison of two output files")
    d.add_argument("file_a")
    d.add_argument("file_b")
    b = sub.add_parser("bench", help="ratio confidence interval of two workloads")
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--level", type=float, default=bench.DEFAULT_LEVEL)
    b.add_argument("--baseline", metavar="CMD", help="baseline command line")
    b.add_argument("--candidate", metavar="CMD", help="candidate command line")
    b.add_argument("--builtin", metavar="NAME", choices=sorted(BUILTINS),
                   help="in-process candidate workload")
    b.add_argument("--builtin-baseline", metavar="NAME", choices=sorted(BUILTINS), default="polar")
    b.add_argument("--t-end", type=float, default=10.0, help="simulated time for builtin workloads")
    return parser


def _run_pendulum(args, parser) -> int:
    try:
        cfg = pendulum.PendulumConfig(t_end=args.t_end, dt=args.dt, rtol=args.rtol, atol=args.atol,
                                      vector=args.vector, linsolver=args.linsolver,
                                      debug_cols=args.debug_cols)
    except IllegalInputError as exc:
        parser.error(str(exc))
    run = pendulum.run_polar if args.command == "pendulum-polar" else pendulum.run_cartesian
    with contextlib.ExitStack() as stack:
        out = sys.stdout
        if args.out:
            out = stack.enter_context(open(args.out, "w", encoding="ascii", newline="\n"))
        try:
            run(cfg, out)
        except (SolverError, IllegalInputError) as exc:
            print(f"nvsolve: solver failure: {exc}", file=sys.stderr)
            return 1
    return 0


def _run_diff(args) -> int:
    try:
        offset = pendulum.diff_outputs(args.file_a, args.file_b)
    except OSError as exc:
        print(f"nvsolve: {exc}", file=sys.stderr)
        return 1
    if offset is None:
        print("identical")
        return 0
    print(f"files differ at byte {offset}")
    return 1


def _run_bench(args, parser) -> int:
    if args.reps < 1 or args.trials < 1:
        parser.error("--reps and --trials must be at least 1")
    if args.builtin:
        cand = _builtin_task(args.builtin, args.t_end)
        base = _builtin_task(args.builtin_baseline, args.t_end)
    elif args.baseline and args.candidate:
        cand = bench.command_task(args.candidate)
        base = bench.command_task(args.baseline)
    else:
        parser.error("bench needs --builtin NAME or both --baseline and --candidate")
    try:
        o = bench.time_repeated(cand, args.reps, args.trials)
        c = bench.time_repeated(base, args.reps, args.trials)
    except Exception as exc:
        print(f"nvsolve: benchmark task failed: {exc}", file=sys.stderr)
        return 1
    ci = bench.ratio_confidence_interval(o, c, args.level)
    print(f"{ci.lo:.6g}\t{ci.median_ratio:.6g}\t{ci.hi:.6g}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("pendulum-polar", "pendulum-cartesian"):
        return _run_pendulum(args, parser)
    if args.command == "diff":
        return _run_diff(args)
    return _run_bench(args, parser)


if __name__ == "__main__":
    sys.exit(main())
