"""End-to-end pixelwise imaging pipeline.

Phantom construction (gray -> ground-truth shape map), per-pixel envelope
synthesis, scale estimation, the closed-form pixelwise shape estimator
driven by the envelope score, and the masked low-pass repair stage.

The pixelwise estimator is algebraically exact: feeding it the analytic
score of the true per-pixel law together with the true scale recovers the
shape value identically (away from the r^2 = omega singularity).
"""
from __future__ import annotations

import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError
from .maps import M_CLAMP, OmegaField, ParamMap, check_envelope
from .windowed import _box_mean

# relative amplitude floor applied before 1/r terms
EPS_R_REL = 1e-6


def phantom_from_gray(gray) -> ParamMap:
    """Map a gray image in [0, 1] to the ground-truth shape field 0.5 + 1.5 g."""
    gray = np.asarray(gray, dtype=float)
    if gray.ndim != 2:
        raise InvalidArgumentError("gray image must be 2-D")
    if not np.all(np.isfinite(gray)) or gray.min() < 0 or gray.max() > 1:
        raise InvalidArgumentError("gray values must lie in [0, 1]")
    return ParamMap.full(0.5 + 1.5 * gray, {"kind": "ground-truth"})


def synthesize_envelope(gt: ParamMap, omega: float, seed) -> np.ndarray:
    """Draw every pixel independently from Nakagami(m(x), omega).

    Uses the exact gamma-transform construction: R = sqrt(Y),
    Y ~ Gamma(shape=m, mean=omega). Deterministic given the seed.
    """
    if omega <= 0 or not np.isfinite(omega):
        raise InvalidArgumentError("omega must be positive and finite")
    m = gt.values
    if np.any(m <= 0):
        raise InvalidArgumentError("ground-truth shape values must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = rng.gamma(shape=m, scale=omega / m)
    return np.sqrt(y)


def estimate_omega(img, mode: str = "global", side: int = 9, roi=None) -> OmegaField:
    """Scale estimate omega_hat = E[R^2]: global over the ROI, or windowed."""
    img = check_envelope(img)
    if roi is None:
        roi = np.ones(img.shape, dtype=bool)
    roi = np.asarray(roi, dtype=bool)
    if roi.shape != img.shape:
        raise InvalidArgumentError("ROI shape mismatch")
    if not roi.any():
        raise InvalidArgumentError("empty ROI")
    x = img * img
    if mode == "global":
        val = float(x[roi].mean())
        if val <= 0:
            raise InvalidArgumentError("degenerate image: E[R^2] = 0")
        return OmegaField(val, "global")
    if mode == "local":
        mean_x, _ = _box_mean(x, side, "shrink")
        floor = EPS_R_REL * max(float(x.max()), 1e-300)
        return OmegaField(np.maximum(mean_x, floor), "local")
    raise InvalidArgumentError(f"unknown omega mode {mode!r}")


def pixel_shape_estimate(
    r, score, omega_hat, *, eps_r=None, eps_d=None, clamp=M_CLAMP
):
    """Closed-form per-pixel shape estimate from amplitude, score, and scale.

      m_hat = (1/r + score) / (2/r - 2 r / omega_hat)

    Returns (m_hat, valid): pixels where the denominator is within eps_d of
    the r^2 = omega_hat singularity, or where the clamp engaged, are invalid.
    Scalar inputs return scalars.
    """
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    score = np.asarray(score, dtype=float)
    omega = np.asarray(omega_hat, dtype=float)
    if eps_r is None:
        eps_r = EPS_R_REL * max(float(np.max(r)), 1e-300)
    if eps_d is None:
        eps_d = 1e-3 * 2.0 / np.sqrt(omega)
    r = np.maximum(r, eps_r)
    denom = 2.0 / r - 2.0 * r / omega
    singular = np.abs(denom) < eps_d
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (1.0 / r + score) / denom
    m = np.where(singular, 0.0, m)
    clamped = (m < clamp[0]) | (m > clamp[1])
    valid = ~(singular | clamped) & np.isfinite(m)
    m = np.clip(np.where(np.isfinite(m), m, 0.0), clamp[0], clamp[1])
    if scalar:
        return float(m), bool(valid)
    return m, valid


def score_based_map(
    img, score_field, omega: OmegaField, *, clamp=M_CLAMP
) -> ParamMap:
    """Apply the pixelwise closed-form estimator over a whole envelope image."""
    img = check_envelope(img)
    score_field = np.asarray(score_field, dtype=float)
    if score_field.shape != img.shape:
        raise InvalidArgumentError("score field shape mismatch")
    om = omega.as_array(img.shape)
    values, valid = pixel_shape_estimate(img, score_field, om, clamp=clamp)
    meta = {
        "estimator": "pixelwise-score",
        "omega_mode": omega.mode,
        "masked_fraction": float(1.0 - valid.mean()),
    }
    return ParamMap(values, valid, meta)


def low_pass(pm: ParamMap, kind: str = "median", side: int = 7) -> ParamMap:
    """Masked low-pass filter (median or average) over a square neighborhood.

    Masked pixels are excluded from each neighborhood and are filled by the
    neighborhood statistic; the output mask keeps every pixel whose
    neighborhood contained at least one valid member.
    """
    if kind not in ("median", "average"):
        raise InvalidArgumentError(f"unknown filter kind {kind!r}")
    if side < 3 or side % 2 == 0:
        raise InvalidArgumentError("filter side must be odd and >= 3")
    half = side // 2
    field = np.where(pm.mask, pm.values, np.nan)
    padded = np.pad(field, half, mode="constant", constant_values=np.nan)
    windows = sliding_window_view(padded, (side, side)).reshape(*pm.shape, -1)
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        # all-NaN neighborhoods are expected; they stay masked below
        warnings.simplefilter("ignore", RuntimeWarning)
        if kind == "median":
            out = np.nanmedian(windows, axis=-1)
        else:
            out = np.nanmean(windows, axis=-1)
    mask = ~np.isnan(out)
    out = np.where(mask, out, 0.0)
    meta = dict(pm.meta)
    meta["low_pass"] = f"{kind}:{side}"
    return ParamMap(out, mask, meta)
