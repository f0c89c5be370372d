"""Minimal reverse-mode layers for small convolutional score networks.

Each layer caches its forward activations and implements backward() that
returns the gradient with respect to its input while accumulating
parameter gradients. Everything is float64 NCHW.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidArgumentError


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(N, C, H, W) -> (N, C*k*k, H*W) patch matrix with same-padding."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((n, c, k * k, h, w), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i * k + j] = xp[:, :, i:i + h, j:j + w]
    return cols.reshape(n, c * k * k, h * w)


def _col2im(gcols: np.ndarray, shape: tuple, k: int) -> np.ndarray:
    """Scatter-add patch gradients back to the (N, C, H, W) input."""
    n, c, h, w = shape
    p = k // 2
    g = gcols.reshape(n, c, k * k, h, w)
    out = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=gcols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + h, j:j + w] += g[:, :, i * k + j]
    return out[:, :, p:p + h, p:p + w]


class Conv2d:
    """3x3-style same-padding convolution with bias."""

    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 dtype=np.float64):
        fan_in = cin * k * k
        self.w = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(cout, fan_in)).astype(dtype)
        self.b = np.zeros(cout, dtype=dtype)
        self.k = k
        self.cin = cin
        self.cout = cout
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.cin:
            raise InvalidArgumentError(
                f"expected {self.cin} input channels, got {x.shape[1]}")
        n, _, h, w = x.shape
        self._shape = x.shape
        self._cols = _im2col(x, self.k)
        y = self.w @ self._cols + self.b[:, None]
        return y.reshape(n, self.cout, h, w)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        n, _, h, w = self._shape
        g2 = np.ascontiguousarray(gy).reshape(n, self.cout, h * w)
        self.gw += np.matmul(g2, self._cols.transpose(0, 2, 1)).sum(axis=0)
        self.gb += g2.sum(axis=(0, 2))
        gcols = self.w.T @ g2
        return _col2im(gcols, self._shape, self.k)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]


class Tanh:
    def __init__(self):
        self._y = None

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, gy):
        return gy * (1.0 - self._y * self._y)

    def params(self):
        return []

    def grads(self):
        return []


class Softplus:
    def __init__(self):
        self._sig = None

    def forward(self, x):
        self._sig = 1.0 / (1.0 + np.exp(-x))
        return np.logaddexp(0.0, x)

    def backward(self, gy):
        return gy * self._sig

    def params(self):
        return []

    def grads(self):
        return []


ACTIVATIONS = {"tanh": Tanh, "softplus": Softplus}


class ResBlock:
    """conv - act - conv with identity skip, then act."""

    def __init__(self, channels: int, k: int, activation: str, rng, dtype=np.float64):
        act = ACTIVATIONS[activation]
        self.c1 = Conv2d(channels, channels, k, rng, dtype)
        self.a1 = act()
        self.c2 = Conv2d(channels, channels, k, rng, dtype)
        self.a2 = act()

    def forward(self, x):
        y = self.c2.forward(self.a1.forward(self.c1.forward(x)))
        return self.a2.forward(x + y)

    def backward(self, gy):
        g = self.a2.backward(gy)
        gx = self.c1.backward(self.a1.backward(self.c2.backward(g)))
        return g + gx

    def params(self):
        return self.c1.params() + self.c2.params()

    def grads(self):
        return self.c1.grads() + self.c2.grads()
