"""Container types for parametric maps and per-pixel scale fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# Default clamp range for estimated shape values; ceiling must exceed 5
# because in-vivo shape values run well past that.
M_CLAMP = (0.01, 10.0)


@dataclass
class ParamMap:
    """2-D map of Nakagami shape values with a validity mask.

    values: float array (H, W); entries at masked-out pixels are undefined.
    mask:   bool array (H, W), True where the estimate is valid.
    meta:   free-form metadata (estimator name, window spec, omega mode, ...).
    """

    values: np.ndarray
    mask: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise InvalidArgumentError("values and mask must be 2-D arrays of equal shape")

    @property
    def shape(self):
        return self.values.shape

    @property
    def masked_fraction(self) -> float:
        return float(1.0 - self.mask.mean())

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]

    @classmethod
    def full(cls, values: np.ndarray, meta: dict | None = None) -> "ParamMap":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool), meta or {})


@dataclass
class OmegaField:
    """Per-pixel scale estimates, or a single global scalar.

    mode is "global" (value is a scalar) or "local" (value is an (H, W) array).
    """

    value: float | np.ndarray
    mode: str = "global"

    def __post_init__(self):
        if self.mode not in ("global", "local"):
            raise InvalidArgumentError(f"unknown omega mode {self.mode!r}")
        arr = np.asarray(self.value, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidArgumentError("omega estimates must be positive and finite")

    def as_array(self, shape) -> np.ndarray:
        """Broadcast to a per-pixel array of the requested shape."""
        if self.mode == "global":
            return np.full(shape, float(self.value))
        arr = np.asarray(self.value, dtype=float)
        if arr.shape != tuple(shape):
            raise InvalidArgumentError("local omega field shape mismatch")
        return arr


def check_envelope(img) -> np.ndarray:
    """Validate an envelope image: 2-D, finite, non-negative."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InvalidArgumentError("envelope image must be 2-D")
    if not np.all(np.isfinite(img)):
        raise InvalidArgumentError("envelope image must be finite")
    if np.any(img < 0):
        raise InvalidArgumentError("envelope amplitudes must be non-negative")
    return img
