#!/usr/bin/env python3
"""Train a score network on homogeneous speckle and compare it against the
analytic score of the generating law.

Prints the Pearson correlation between the network output and the exact
score on a held-out image, plus the kernel-estimate baseline.
"""
import argparse
import time

import numpy as np

from nakmap.metrics import pearson, rmse
from nakmap.nakagami import NakagamiParams, analytic_score, sample
from nakmap.scorenet import TrainConfig, forward, kernel_score, save, train


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.2)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--images", type=int, default=500)
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", default=None, help="optional checkpoint path")
    args = ap.parse_args(argv)

    p = NakagamiParams(args.m, args.omega)
    imgs = [sample(p, 0, seed=100 + i, size=(64, 64)) for i in range(args.images)]

    cfg = TrainConfig(epochs=args.epochs, batch_size=25, crop=64, lr=2e-3,
                      delta_max=0.5, delta_min=0.02, seed=args.seed,
                      arch={"channels": 16, "blocks": 1})
    t0 = time.time()
    model = train(imgs, cfg)
    print(f"trained in {time.time() - t0:.0f}s, final loss {model.meta['final_loss']:.4f}")

    test = sample(p, 0, seed=9999, size=(64, 64))
    lo, hi = np.quantile(test, [0.05, 0.95])
    sel = (test >= lo) & (test <= hi)
    true = analytic_score(test[sel], p)

    net = forward(model, test)[sel]
    r, _ = pearson(net.ravel(), true.ravel())
    print(f"network vs analytic: pearson {r:.4f}")

    ks = kernel_score(test.ravel(), test[sel].ravel())
    print(f"kernel  vs analytic: rmse {rmse(ks.reshape(1, -1), true.reshape(1, -1)):.4f}")

    if args.output:
        save(model, args.output)
        print(f"checkpoint written to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
