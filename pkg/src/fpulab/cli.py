"""``fpu-lab <experiment> --config PATH [--seed S] [--out DIR] [--threads K]``.

Exit status: 0 on success, 2 on invalid input or configuration, 3 when a
trajectory blows up (partial outputs are kept).
"""

from __future__ import annotations

import argparse
import logging
import sys

from fpulab.errors import BlowUpError, FPULabError, InvalidInputError
from fpulab.experiments import OUT_ENV, RUNNERS, load_config, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BLOWUP = 3

log = logging.getLogger("fpulab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpu-lab", description="Run an FPU / Toda / KdV / Gibbs experiment and write CSV outputs.")
    p.add_argument("experiment", choices=sorted(RUNNERS))
    p.add_argument("--config", required=True, help="INI file describing the run")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides [experiment] seed)")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./fpu-lab-out)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for scan points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the validation code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment, args.seed, args.out, args.threads)
        result = run_experiment(cfg)
    except BlowUpError as exc:
        print(f"fpu-lab: blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (InvalidInputError, ValueError) as exc:
        print(f"fpu-lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FPULabError as exc:
        print(f"fpu-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for key, value in result.summary.items():
        print(f"{key} = {value}")
    for f in result.files:
        log.info("wrote %s", f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
