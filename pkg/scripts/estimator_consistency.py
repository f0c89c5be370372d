#!/usr/bin/env python3
"""Consistency check of the windowed estimators against known parameters.

Draws growing sample sizes from a few Nakagami laws and prints the error
of each estimator; the errors should shrink roughly like 1/sqrt(n).
"""
import argparse

import numpy as np

from nakmap.nakagami import NakagamiParams, sample
from nakmap.windowed import mle_exact, mle_taylor, moment_estimate


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print(f"{'m':>6} {'n':>8} {'moment':>10} {'mle_taylor':>11} {'mle_exact':>10}")
    for m in (0.6, 1.0, 1.5, 3.0):
        p = NakagamiParams(m, 1.0)
        for n in (10**3, 10**4, 10**5):
            r = sample(p, n, seed=args.seed)
            e_mom = abs(moment_estimate(r)[0] - m)
            e_tay = abs(mle_taylor(r) - m)
            e_ex = abs(mle_exact(r) - m)
            print(f"{m:>6.2f} {n:>8d} {e_mom:>10.4f} {e_tay:>11.4f} {e_ex:>10.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
