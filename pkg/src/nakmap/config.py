"""Experiment configuration (INI-style sections) and run manifests.

The config format is flat key=value text for diff-ability. A run manifest
records the config hash, toolkit version, and a checksum per produced
file; identical config + seeds reproduce identical manifests. Stage wall
times go to a separate timing log so manifests stay byte-stable.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .windowed import WindowSpec


@dataclass
class EstimatorSpec:
    """One roster entry: kind in {moment, mle_taylor, mle_exact, wmc, score}."""

    kind: str
    windows: tuple[int, ...] = ()

    @property
    def name(self) -> str:
        if self.windows:
            return f"{self.kind}-" + "-".join(str(w) for w in self.windows)
        return self.kind


def parse_estimator_token(token: str) -> EstimatorSpec:
    kind, _, rest = token.partition(":")
    kind = kind.strip()
    if kind == "score":
        return EstimatorSpec("score")
    if kind in ("moment", "mle_taylor", "mle_exact"):
        if not rest:
            raise ConfigError(f"estimator {kind!r} needs a window side, e.g. {kind}:9")
        return EstimatorSpec(kind, (int(rest),))
    if kind == "wmc":
        sides = tuple(int(s) for s in rest.split("+") if s)
        if len(sides) < 2:
            raise ConfigError("wmc needs >= 2 window sides, e.g. wmc:9+11+13")
        return EstimatorSpec(kind, sides)
    raise ConfigError(f"unknown estimator {kind!r}")


@dataclass
class ExperimentConfig:
    # phantom
    phantom_source: str = "builtin:strokes"
    phantom_count: int = 8
    phantom_size: int = 64
    phantom_seed: int = 11
    # simulate
    omega: float = 1.0
    simulate_seed: int = 7
    # train
    train_epochs: int = 20
    train_batch: int = 16
    train_lr: float = 2e-4
    train_seed: int = 3
    train_channels: int = 32
    train_blocks: int = 2
    train_crop: int = 256
    # estimate
    estimators: list[EstimatorSpec] = field(default_factory=lambda: [
        EstimatorSpec("moment", (9,)),
    ])
    score_source: str = "analytic"  # analytic | kernel | checkpoint:<path>
    omega_mode: str = "global"  # global | local:<side>
    filter_spec: str = "median:7"  # median:<side> | average:<side> | none
    # evaluate
    psnr_max: float = 2.0
    labels_csv: str = ""
    # output
    out_dir: str = "out"
    raw_text: str = ""

    def window_spec(self, side: int, stride: int = 1) -> WindowSpec:
        try:
            return WindowSpec(side=side, stride=stride)
        except Exception as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    cfg = ExperimentConfig(raw_text=text)
    try:
        if parser.has_section("phantom"):
            s = parser["phantom"]
            cfg.phantom_source = s.get("source", cfg.phantom_source)
            cfg.phantom_count = s.getint("count", cfg.phantom_count)
            cfg.phantom_size = s.getint("size", cfg.phantom_size)
            cfg.phantom_seed = s.getint("seed", cfg.phantom_seed)
        if parser.has_section("simulate"):
            s = parser["simulate"]
            cfg.omega = s.getfloat("omega", cfg.omega)
            cfg.simulate_seed = s.getint("seed", cfg.simulate_seed)
        if parser.has_section("train"):
            s = parser["train"]
            cfg.train_epochs = s.getint("epochs", cfg.train_epochs)
            cfg.train_batch = s.getint("batch_size", cfg.train_batch)
            cfg.train_lr = s.getfloat("lr", cfg.train_lr)
            cfg.train_seed = s.getint("seed", cfg.train_seed)
            cfg.train_channels = s.getint("channels", cfg.train_channels)
            cfg.train_blocks = s.getint("blocks", cfg.train_blocks)
            cfg.train_crop = s.getint("crop", cfg.train_crop)
        if parser.has_section("estimate"):
            s = parser["estimate"]
            roster = s.get("estimators", "").split()
            if roster:
                cfg.estimators = [parse_estimator_token(t) for t in roster]
            cfg.score_source = s.get("score_source", cfg.score_source)
            cfg.omega_mode = s.get("omega_mode", cfg.omega_mode)
            cfg.filter_spec = s.get("filter", cfg.filter_spec)
        if parser.has_section("evaluate"):
            s = parser["evaluate"]
            cfg.psnr_max = s.getfloat("psnr_max", cfg.psnr_max)
            cfg.labels_csv = s.get("labels", cfg.labels_csv)
        if parser.has_section("output"):
            cfg.out_dir = parser["output"].get("dir", cfg.out_dir)
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    n_score = sum(1 for e in cfg.estimators if e.kind == "score")
    if n_score > 1:
        raise ConfigError("configure the score estimator at most once")
    if cfg.omega_mode != "global" and not cfg.omega_mode.startswith("local:"):
        raise ConfigError(f"bad omega_mode {cfg.omega_mode!r}")
    if cfg.filter_spec != "none":
        kind, _, side = cfg.filter_spec.partition(":")
        if kind not in ("median", "average") or not side.isdigit():
            raise ConfigError(f"bad filter spec {cfg.filter_spec!r}")
    return cfg


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, stage: str, cfg: ExperimentConfig, files) -> Path:
    manifest = {
        "stage": stage,
        "toolkit_version": __version__,
        "config_hash": cfg.config_hash,
        "checksums": {Path(f).name: sha256_file(f) for f in sorted(map(str, files))},
    }
    path = Path(out_dir) / f"manifest_{stage}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
