"""Score network: compact residual CNN mapping an envelope image to its
pixelwise score field (d/dr of the log-density of the data distribution).

The architecture is a config-driven descriptor so larger nets can be
swapped in. Inputs are normalized by a stored amplitude scale; outputs are
denormalized back to 1/amplitude units (score scales inversely with
amplitude).
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .layers import ACTIVATIONS, Conv2d, ResBlock

DEFAULT_ARCH = {"kernel": 3, "channels": 32, "blocks": 2, "activation": "tanh"}


class ScoreModel:
    def __init__(self, arch: dict | None = None, input_scale: float = 1.0,
                 rng: np.random.Generator | int | None = 0, meta: dict | None = None,
                 dtype=np.float64):
        self.arch = dict(DEFAULT_ARCH, **(arch or {}))
        if self.arch["activation"] not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {self.arch['activation']!r}")
        if input_scale <= 0:
            raise InvalidArgumentError("input_scale must be positive")
        self.input_scale = float(input_scale)
        self.meta = meta or {}
        self.dtype = np.dtype(dtype)
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        k, c = self.arch["kernel"], self.arch["channels"]
        act = ACTIVATIONS[self.arch["activation"]]
        self.layers = [Conv2d(1, c, k, rng, self.dtype), act()]
        for _ in range(self.arch["blocks"]):
            self.layers.append(ResBlock(c, k, self.arch["activation"], rng, self.dtype))
        self.layers.append(Conv2d(c, 1, k, rng, self.dtype))

    # --- raw network on normalized batches -------------------------------
    def net_forward(self, x: np.ndarray) -> np.ndarray:
        """(N, 1, H, W) normalized batch -> normalized score batch."""
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def net_backward(self, gy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
        return gy

    # --- parameter vector ------------------------------------------------
    def param_arrays(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grad_arrays(self):
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.param_arrays())

    def get_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.param_count:
            raise InvalidArgumentError(
                f"parameter vector has {flat.size} entries, expected {self.param_count}")
        i = 0
        for p in self.param_arrays():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    def get_grads(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grad_arrays()])

    def zero_grads(self) -> None:
        for g in self.grad_arrays():
            g[...] = 0.0


def forward(model: ScoreModel, img: np.ndarray) -> np.ndarray:
    """Score field of a single envelope image, in 1/amplitude units."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InvalidArgumentError("envelope image must be 2-D")
    x = (img / model.input_scale)[None, None]
    y = model.net_forward(x)[0, 0]
    return y / model.input_scale
