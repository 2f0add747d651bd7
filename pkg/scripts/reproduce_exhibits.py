#!/usr/bin/env python3
"""Write every table/figure dataset to one CSV per exhibit.

    python scripts/reproduce_exhibits.py --seed 1 --reps 1000000 --out results/

Monte Carlo presets (tables 1-2, figures 4-7) take minutes per GWMA column at
10**6 replicates; use --workers or GWMA_ARL_WORKERS on a multicore machine.
"""

import argparse
import pathlib
import sys
import time

from gwma_arl.cli import main as cli_main
from gwma_arl.presets import PRESETS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--only", nargs="*", choices=sorted(PRESETS), help="subset of presets")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.only or sorted(PRESETS):
        t0 = time.perf_counter()
        path = args.out / f"{name}.csv"
        code = cli_main(["reproduce", name, "--seed", str(args.seed), "--reps", str(args.reps),
                         "--workers", str(args.workers), "--out", str(path)])
        print(f"{name:10s} -> {path} ({time.perf_counter() - t0:.1f} s)", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
