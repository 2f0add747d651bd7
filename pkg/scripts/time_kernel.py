#!/usr/bin/env python3
"""Replicates per second of the run-length kernel for the paper's designs."""

import argparse
import time

from gwma_arl import presets as P
from gwma_arl.simulate import SimConfig, zero_state_arl_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--delta", type=float, default=0.0)
    args = ap.parse_args()
    cfg = SimConfig(seed=1, reps=args.reps, workers=args.workers)
    zero_state_arl_mc(P.GWMA_080.spec, 3.0, cfg.replace(reps=10))  # compile
    for d in P.TABLE1 + (P.EWMA_0206, P.EWMA_0152):
        t0 = time.perf_counter()
        r = zero_state_arl_mc(d.spec, args.delta, cfg)
        dt = time.perf_counter() - t0
        print(f"{d.name:26s} ARL {r.estimate:9.3f} ± {r.std_error:6.3f}  "
              f"{args.reps / dt:10.0f} reps/s  ({dt * 1e6 / args.reps:.0f} s per 10^6)")


if __name__ == "__main__":
    main()
