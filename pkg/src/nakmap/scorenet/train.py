"""Denoising score-matching training with annealed perturbation scale.

Loss per batch: mean over batch and pixels of ||u + sigma * s(x + sigma u)||^2,
u standard normal, sigma drawn as |N(0, delta^2)| with delta annealed
linearly across epochs. Optimizer is decoupled-weight-decay Adam with the
paper-free standard moments (0.9 / 0.999 / 1e-8), implemented in-place.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError, NumericError, TrainingFailureError
from .model import DEFAULT_ARCH, ScoreModel


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 2e-4
    lr_halve_epoch: int = 25  # learning rate halved after this epoch
    weight_decay: float = 0.01
    batch_size: int = 16
    crop: int = 256  # reduced automatically for small images
    delta_max: float = 0.1  # annealing bounds, relative to data std
    delta_min: float = 0.001
    sigma_mode: str = "abs-normal"  # or "deterministic"
    seed: int = 0
    augment: bool = True
    dtype: str = "float32"  # compute precision; float64 master weights
    arch: dict = field(default_factory=lambda: dict(DEFAULT_ARCH))
    divergence_factor: float = 10.0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")
        if not (self.delta_max >= self.delta_min > 0):
            raise InvalidArgumentError("need delta_max >= delta_min > 0")
        if self.sigma_mode not in ("abs-normal", "deterministic"):
            raise InvalidArgumentError(f"unknown sigma mode {self.sigma_mode!r}")


def ardae_loss(model: ScoreModel, batch: np.ndarray, u: np.ndarray, sigma) -> tuple[float, np.ndarray]:
    """Loss and flat parameter gradient for one normalized batch.

    batch, u: (N, 1, H, W); sigma: scalar or per-sample (N, 1, 1, 1).
    """
    batch = np.asarray(batch, dtype=float)
    u = np.asarray(u, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (batch.shape[0], 1, 1, 1))
    if np.any(sigma < 0):
        raise InvalidArgumentError("sigma must be non-negative")
    model.zero_grads()
    s = model.net_forward(batch + sigma * u)
    resid = u + sigma * s
    loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        raise NumericError(
            f"non-finite score-matching loss (|s| max = {np.abs(s).max():.3g})")
    model.net_backward(2.0 * sigma * resid / resid.size)
    return loss, model.get_grads()


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, size: int, lr: float, weight_decay: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grads
        self.v = self.b2 * self.v + (1 - self.b2) * grads * grads
        mhat = self.m / (1 - self.b1 ** self.t)
        vhat = self.v / (1 - self.b2 ** self.t)
        return params - self.lr * (mhat / (np.sqrt(vhat) + self.eps) + self.wd * params)


def _augment(img: np.ndarray, crop: int, rng: np.random.Generator) -> np.ndarray:
    """Horizontal flip, quarter-turn rotation, random crop."""
    if rng.random() < 0.5:
        img = img[:, ::-1]
    img = np.rot90(img, k=int(rng.integers(0, 4)))
    h, w = img.shape
    ch, cw = min(crop, h), min(crop, w)
    y = int(rng.integers(0, h - ch + 1))
    x = int(rng.integers(0, w - cw + 1))
    return np.ascontiguousarray(img[y:y + ch, x:x + cw])


def train(images, cfg: TrainConfig) -> ScoreModel:
    """Fit the score network to a dataset of envelope images.

    Deterministic given cfg.seed. Images are normalized to unit mean
    amplitude; the fitted model stores the scale so its outputs come back
    in 1/amplitude units of the original data.
    """
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise InvalidArgumentError("empty training set")
    scale = float(np.mean([im.mean() for im in images]))
    if scale <= 0:
        raise InvalidArgumentError("degenerate dataset: zero mean amplitude")
    normed = [im / scale for im in images]
    data_std = float(np.std(np.concatenate([im.ravel() for im in normed])))
    data_std = max(data_std, 1e-12)

    rng = np.random.default_rng(cfg.seed)
    model = ScoreModel(cfg.arch, input_scale=scale, rng=rng, dtype=np.dtype(cfg.dtype))
    opt = AdamW(model.param_count, cfg.lr, cfg.weight_decay)
    params = model.get_params()

    history: list[float] = []
    first_loss = None
    bad_steps = 0
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr * (0.5 if epoch >= cfg.lr_halve_epoch else 1.0)
        frac = epoch / max(cfg.epochs - 1, 1)
        delta = data_std * (cfg.delta_max + frac * (cfg.delta_min - cfg.delta_max))
        order = rng.permutation(len(normed))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if cfg.augment:
                tiles = [_augment(normed[i], cfg.crop, rng) for i in idx]
            else:
                tiles = [normed[i] for i in idx]
            side = min(min(t.shape) for t in tiles)
            batch = np.stack([t[:side, :side] for t in tiles])[:, None].astype(model.dtype)
            u = rng.standard_normal(batch.shape).astype(model.dtype)
            if cfg.sigma_mode == "abs-normal":
                sigma = np.abs(rng.normal(0.0, delta, size=(len(idx), 1, 1, 1)))
            else:
                sigma = np.full((len(idx), 1, 1, 1), delta)
            model.set_params(params)
            loss, grads = ardae_loss(model, batch, u, sigma)
            history.append(loss)
            if first_loss is None:
                first_loss = loss
            bad_steps = bad_steps + 1 if loss > cfg.divergence_factor * first_loss else 0
            if bad_steps >= 100:
                raise TrainingFailureError(
                    f"loss diverged: {loss:.3g} vs initial {first_loss:.3g}")
            params = opt.step(params, grads)
    model.set_params(params)
    model.meta = {
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "final_loss": history[-1],
        "loss_history": history,
        "data_std": data_std,
    }
    return model
