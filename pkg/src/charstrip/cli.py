"""Command line interface.

    charstrip check              --config cfg.toml [--out DIR]
    charstrip solve-linear       --config cfg.toml [--out DIR] [--derivative]
    charstrip solve-quasilinear  --config cfg.toml [--out DIR]
    charstrip counterexample     --config cfg.toml [--out DIR]

Common options: --nx/--nt override the grid, --dump-characteristic J,X,T
writes one characteristic curve to CSV for debugging.  The CHARSTRIP_THREADS
environment variable caps the thread count of the underlying linear-algebra
backend.  Exit codes are documented in the project README.
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_env():
    threads = os.environ.get("CHARSTRIP_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _parse_dump(text):
    try:
        j, x, t = text.split(",")
        return int(j), float(x), float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(
            "expected J,X,T (family index, abscissa, time)") from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="charstrip",
        description="Characteristic-based solvers for first-order hyperbolic "
                    "boundary value problems on a strip",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
        ("check", ()),
        ("solve-linear", ("derivative",)),
        ("solve-quasilinear", ()),
        ("counterexample", ()),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="TOML configuration")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--nx", type=int, default=None,
                         help="override spatial resolution")
        cmd.add_argument("--nt", type=int, default=None,
                         help="override temporal resolution")
        cmd.add_argument("--dump-characteristic", type=_parse_dump,
                         default=None, metavar="J,X,T",
                         help="write one characteristic curve to CSV")
        if "derivative" in extra:
            cmd.add_argument("--derivative", action="store_true",
                             help="also solve and write the derivative field")
    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    from .scenarios import run

    code = run(
        args.command,
        args.config,
        out_dir=args.out,
        nx=args.nx,
        nt=args.nt,
        dump_characteristic=args.dump_characteristic,
        want_derivative=getattr(args, "derivative", False),
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
