"""Command-line driver: simulate | train | estimate | evaluate | compare.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
NAKMAP_THREADS sets the default for --threads (BLAS/OpenMP pool size).
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import imageio, metrics, phantoms, pipeline, scorenet
from .config import ExperimentConfig, load_config, write_manifest
from .errors import ConfigError, DataError, NakmapError, NumericError
from .maps import OmegaField
from .nakagami import NakagamiParams, analytic_score
from .pipeline import low_pass, phantom_from_gray, score_based_map, synthesize_envelope
from .scorenet import TrainConfig
from .windowed import sliding_map, wmc_map


def _out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    out = Path(override or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_timing(out: Path, stage: str, seconds: float) -> None:
    with open(out / "timings.log", "a") as fh:
        fh.write(f"{stage}\t{seconds:.3f}s\n")


def _phantom_grays(cfg: ExperimentConfig) -> list[np.ndarray]:
    source = cfg.phantom_source
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name == "strokes":
            return phantoms.stroke_suite(cfg.phantom_count, cfg.phantom_seed, cfg.phantom_size)
        return [phantoms.builtin_phantom(name, cfg.phantom_size, seed=cfg.phantom_seed + i)
                for i in range(cfg.phantom_count)]
    if source.startswith("dir:"):
        root = Path(source.split(":", 1)[1])
        paths = sorted(root.glob("*.pgm"))
        if not paths:
            raise DataError(f"no .pgm files under {root}")
        return [imageio.read_pgm(p) for p in paths]
    raise ConfigError(f"unknown phantom source {source!r}")


def _env_paths(out: Path) -> list[Path]:
    paths = sorted(out.glob("env_*.fmap"))
    if not paths:
        raise DataError(f"no envelope files under {out}; run simulate first")
    return paths


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    grays = _phantom_grays(cfg)
    produced = []
    for i, gray in enumerate(grays):
        gt = phantom_from_gray(gray)
        env = synthesize_envelope(gt, cfg.omega, cfg.simulate_seed + i)
        gt_path = out / f"gt_{i:03d}.fmap"
        env_path = out / f"env_{i:03d}.fmap"
        common = {"producer": "nakmap-simulate", "config": cfg.config_hash,
                  "omega": cfg.omega, "seed": cfg.simulate_seed + i}
        imageio.write_param_map(gt_path, gt, common)
        imageio.write_float_map(env_path, env, common)
        produced += [gt_path, env_path]
    return produced


def cmd_train(cfg: ExperimentConfig, out: Path) -> list[Path]:
    images = [imageio.read_float_map(p)[0] for p in _env_paths(out)]
    tc = TrainConfig(
        epochs=cfg.train_epochs, lr=cfg.train_lr, batch_size=cfg.train_batch,
        crop=cfg.train_crop, seed=cfg.train_seed,
        lr_halve_epoch=max(cfg.train_epochs // 2, 1),
        arch={"channels": cfg.train_channels, "blocks": cfg.train_blocks},
    )
    model = scorenet.train(images, tc)
    ckpt = out / "score_model.ckpt"
    model.meta["config_hash"] = cfg.config_hash
    scorenet.save(model, ckpt)
    loss_csv = out / "loss_history.csv"
    with open(loss_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, loss in enumerate(model.meta["loss_history"]):
            writer.writerow([i, f"{loss:.10g}"])
    return [ckpt, loss_csv]


def _score_field(cfg: ExperimentConfig, out: Path, env: np.ndarray, gt_path: Path):
    source = cfg.score_source
    if source == "analytic":
        gt = imageio.read_param_map(gt_path)
        field = np.empty_like(env)
        floor = pipeline.EPS_R_REL * max(float(env.max()), 1e-300)
        r = np.maximum(env, floor)
        field = (2.0 * gt.values - 1.0) / r - 2.0 * gt.values * r / cfg.omega
        return field
    if source == "kernel":
        flat = env.ravel()
        floor = pipeline.EPS_R_REL * max(float(env.max()), 1e-300)
        r = np.maximum(env, floor)
        return scorenet.kernel_score(flat, r.ravel()).reshape(env.shape)
    if source.startswith("checkpoint:"):
        ckpt = Path(source.split(":", 1)[1])
        if not ckpt.exists():
            ckpt_fallback = out / "score_model.ckpt"
            if ckpt_fallback.exists():
                ckpt = ckpt_fallback
            else:
                raise ConfigError(f"score checkpoint not found: {ckpt}")
        model = _score_field.cache.get(str(ckpt))
        if model is None:
            model = scorenet.load(ckpt)
            _score_field.cache[str(ckpt)] = model
        return scorenet.forward(model, env)
    raise ConfigError(f"unknown score source {source!r}")


_score_field.cache = {}


def _apply_filter(cfg: ExperimentConfig, pm):
    if cfg.filter_spec == "none":
        return pm
    kind, _, side = cfg.filter_spec.partition(":")
    return low_pass(pm, kind, int(side))


def cmd_estimate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    produced = []
    for env_path in _env_paths(out):
        idx = env_path.stem.split("_")[1]
        env, _ = imageio.read_float_map(env_path)
        for est in cfg.estimators:
            if est.kind == "score":
                if cfg.omega_mode == "global":
                    omega = pipeline.estimate_omega(env, "global")
                else:
                    omega = pipeline.estimate_omega(
                        env, "local", side=int(cfg.omega_mode.split(":")[1]))
                field = _score_field(cfg, out, env, out / f"gt_{idx}.fmap")
                pm = score_based_map(env, field, omega)
                pm = _apply_filter(cfg, pm)
            elif est.kind == "wmc":
                pm = wmc_map(env, [cfg.window_spec(s) for s in est.windows])
            else:
                pm = sliding_map(env, cfg.window_spec(est.windows[0]), est.kind)
            path = out / f"map_{est.name}_{idx}.fmap"
            imageio.write_param_map(path, pm, {"producer": "nakmap-estimate",
                                               "config": cfg.config_hash})
            produced.append(path)
    return produced


def _read_cohort(path) -> list[metrics.CohortRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(metrics.CohortRecord(
                row["subject"], float(row["feature"]), float(row["reference"])))
    if not records:
        raise DataError(f"empty cohort file: {path}")
    return records


def cmd_evaluate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    gt_paths = sorted(out.glob("gt_*.fmap"))
    if not gt_paths:
        raise DataError(f"no ground-truth maps under {out}")
    rows = []
    for est in cfg.estimators:
        psnrs, rmses = [], []
        missing = []
        for gt_path in gt_paths:
            idx = gt_path.stem.split("_")[1]
            map_path = out / f"map_{est.name}_{idx}.fmap"
            if not map_path.exists():
                missing.append(map_path.name)
                continue
            gt = imageio.read_param_map(gt_path)
            pm = imageio.read_param_map(map_path)
            mask = gt.mask & pm.mask
            rmses.append(metrics.rmse(pm.values, gt.values, mask))
            psnrs.append(metrics.psnr(pm.values, gt.values, mask, cfg.psnr_max))
        if missing:
            raise DataError("missing estimate maps: " + ", ".join(missing))
        rows.append((est.name, float(np.mean(psnrs)), float(np.mean(rmses))))

    metrics_csv = out / "metrics.csv"
    with open(metrics_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "psnr_db", "rmse"])
        for name, p, r in rows:
            writer.writerow([name, f"{p:.4f}", f"{r:.6f}"])
    table_txt = out / "table.txt"
    with open(table_txt, "w") as fh:
        fh.write(f"{'method':<20}{'PSNR (dB)':>12}{'RMSE':>10}\n")
        for name, p, r in rows:
            fh.write(f"{name:<20}{p:>12.2f}{r:>10.4f}\n")
    produced = [metrics_csv, table_txt]

    if cfg.labels_csv:
        produced += _cohort_outputs(cfg, out)
    return produced


def _cohort_outputs(cfg: ExperimentConfig, out: Path) -> list[Path]:
    records = _read_cohort(cfg.labels_csv)
    report = metrics.cohort_report(records)
    roc_csv = out / "cohort_roc.csv"
    with open(roc_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comparison", "rule", "auroc", "threshold", "sensitivity",
                         "specificity", "ppv", "npv", "f1", "welch_p", "stars"])
        for name, comp in report["comparisons"].items():
            if comp["empty"]:
                writer.writerow([name, "EMPTY"] + [""] * 9)
                continue
            roc = comp["roc"]
            for op in roc.operating_points:
                writer.writerow([
                    name, op.rule, f"{roc.auroc:.4f}", f"{op.threshold:.6g}",
                    f"{op.sensitivity:.4f}", f"{op.specificity:.4f}", f"{op.ppv:.4f}",
                    f"{op.npv:.4f}", f"{op.f1:.4f}", f"{comp['welch_p']:.4g}",
                    comp["stars"]])
    box_csv = out / "cohort_box.csv"
    with open(box_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "n", "q1", "median", "q3", "whisker_lo", "whisker_hi"])
        for stage, st in report["stages"].items():
            if st is None:
                writer.writerow([stage, 0] + [""] * 5)
            else:
                writer.writerow([stage, st["n"], st["q1"], st["median"], st["q3"],
                                 st["whisker_lo"], st["whisker_hi"]])
    summary_txt = out / "cohort_summary.txt"
    with open(summary_txt, "w") as fh:
        for name, comp in report["comparisons"].items():
            if comp["empty"]:
                fh.write(f"{name}: EMPTY\n")
            else:
                fh.write(f"{name}: AUROC={comp['roc'].auroc:.3f} "
                         f"p={comp['welch_p']:.3g} {comp['stars']}\n")
    return [roc_csv, box_csv, summary_txt]


def cmd_compare(cfg: ExperimentConfig, out: Path) -> list[Path]:
    metrics_csv = out / "metrics.csv"
    if not metrics_csv.exists():
        raise DataError(f"no metrics.csv under {out}; run evaluate first")
    with open(metrics_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: -float(r["psnr_db"]))
    comparison = out / "comparison.csv"
    with open(comparison, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "method", "psnr_db", "rmse"])
        for i, row in enumerate(rows, 1):
            writer.writerow([i, row["method"], row["psnr_db"], row["rmse"]])
    return [comparison]


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "estimate": cmd_estimate,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nakmap",
                                     description="Nakagami parametric imaging toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override the stage seed from the config")
        p.add_argument("--output", default=None, help="override the output directory")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("NAKMAP_THREADS", "0")) or None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        os.environ.setdefault("OPENBLAS_NUM_THREADS", str(args.threads))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.phantom_seed = args.seed
            cfg.simulate_seed = args.seed
            cfg.train_seed = args.seed
        out = _out_dir(cfg, args.output)
        t0 = time.perf_counter()
        produced = COMMANDS[args.command](cfg, out)
        produced.append(write_manifest(out, args.command, cfg, produced))
        _log_timing(out, args.command, time.perf_counter() - t0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except NakmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in produced:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
