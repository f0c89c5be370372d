"""Procedural gray-value phantoms for the synthetic benchmark.

All generators return gray images in [0, 1]; the pipeline maps gray to
ground-truth shape values. "strokes" produces digit-like random stroke
patterns at 28x28 and upscales them, so the benchmark runs with zero
external data.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from .errors import InvalidArgumentError

BUILTIN = ("two-region", "checkerboard", "smooth-gradient", "strokes")


def two_region(size: int = 64, split: float = 0.5, lo: float = 0.2, hi: float = 0.8) -> np.ndarray:
    g = np.full((size, size), lo)
    g[:, int(split * size):] = hi
    return g


def checkerboard(size: int = 64, cell: int = 16, lo: float = 0.2, hi: float = 0.8) -> np.ndarray:
    r = np.arange(size) // cell
    board = (r[:, None] + r[None, :]) % 2
    return np.where(board == 0, lo, hi).astype(float)


def smooth_gradient(size: int = 64) -> np.ndarray:
    r = np.linspace(0.0, 1.0, size)
    return 0.5 * (r[:, None] + r[None, :])


def stroke_digit(rng: np.random.Generator, base: int = 28, size: int = 64) -> np.ndarray:
    """Random thick-stroke glyph: polyline on a 28x28 canvas, upscaled."""
    canvas = np.zeros((base, base))
    n_pts = rng.integers(3, 6)
    pts = rng.uniform(4, base - 4, size=(n_pts, 2))
    for (y0, x0), (y1, x1) in zip(pts[:-1], pts[1:]):
        steps = int(max(abs(y1 - y0), abs(x1 - x0)) * 4) + 2
        ys = np.linspace(y0, y1, steps)
        xs = np.linspace(x0, x1, steps)
        for y, x in zip(ys, xs):
            canvas[int(round(y)), int(round(x))] = 1.0
    canvas = gaussian_filter(canvas, sigma=1.0)
    peak = canvas.max()
    if peak > 0:
        canvas = np.clip(canvas / (0.6 * peak), 0.0, 1.0)
    out = zoom(canvas, size / base, order=1)
    return np.clip(out, 0.0, 1.0)


def stroke_suite(count: int, seed: int, size: int = 64) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [stroke_digit(rng, size=size) for _ in range(count)]


def builtin_phantom(name: str, size: int = 64, *, seed: int = 0) -> np.ndarray:
    if name == "two-region":
        return two_region(size)
    if name == "checkerboard":
        return checkerboard(size)
    if name == "smooth-gradient":
        return smooth_gradient(size)
    if name == "strokes":
        return stroke_suite(1, seed, size)[0]
    raise InvalidArgumentError(f"unknown builtin phantom {name!r}")
