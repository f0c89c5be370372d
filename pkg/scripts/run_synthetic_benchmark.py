#!/usr/bin/env python3
"""Full synthetic benchmark through the CLI: simulate, train, estimate
with every estimator, evaluate, and rank.

Writes everything under --output (default bench_out/). Expect the train
stage to dominate the wall time.
"""
import argparse
import sys
import tempfile
from pathlib import Path

from nakmap.cli import main as nakmap_main

CONFIG_TEMPLATE = """\
[phantom]
source = builtin:strokes
count = {count}
size = 64
seed = {seed}

[simulate]
omega = 1.0
seed = {seed}

[train]
epochs = {epochs}
batch_size = 16
lr = 2e-3
crop = 64
channels = 16
blocks = 1
seed = 0

[estimate]
estimators = moment:9 moment:11 moment:13 mle_taylor:9 wmc:9+11+13 score
score_source = checkpoint:score_model.ckpt
omega_mode = global
filter = median:7

[output]
dir = {out}
"""


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output", default="bench_out")
    ap.add_argument("--count", type=int, default=32)
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)

    out = Path(args.output).resolve()
    with tempfile.TemporaryDirectory() as d:
        cfg = Path(d) / "bench.ini"
        cfg.write_text(CONFIG_TEMPLATE.format(
            count=args.count, epochs=args.epochs, seed=args.seed, out=out))
        for stage in ("simulate", "train", "estimate", "evaluate", "compare"):
            print(f"== {stage} ==", flush=True)
            rc = nakmap_main([stage, "--config", str(cfg)])
            if rc != 0:
                print(f"stage {stage} failed with exit code {rc}", file=sys.stderr)
                return rc
    print((out / "table.txt").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(run())
