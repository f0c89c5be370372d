"""Windowed shape estimators and sliding-window parametric maps.

Per-window estimators:
  moment_estimate  m_inv = E[R^2]^2 / E[(R^2 - E[R^2])^2]   (population moments)
  mle_taylor       m_ML  = 1 / (2 * (log mean(r^2) - mean(log r^2)))
  mle_exact        root of log(m) - psi(m) = log mean(r^2) - mean(log r^2)

sliding_map applies an estimator over a square window centered at every
pixel (box-filter accelerated); wmc_map averages moment maps over several
window sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.ndimage import uniform_filter

from .errors import DegenerateWindowError, DomainError, InvalidArgumentError, NumericError
from .maps import M_CLAMP, ParamMap, check_envelope

DELTA_MIN = 1e-12
VAR_REL_MIN = 1e-12
ESTIMATORS = ("moment", "mle_taylor", "mle_exact")


@dataclass(frozen=True)
class WindowSpec:
    """Square sliding window: odd side, stride, and border handling.

    border_policy "shrink" clips the window at image borders; "reflect"
    pads the image by reflection so every window has side^2 samples.
    """

    side: int
    stride: int = 1
    border_policy: str = "shrink"

    def __post_init__(self):
        if self.side < 3 or self.side % 2 == 0:
            raise InvalidArgumentError("window side must be odd and >= 3")
        if self.stride < 1 or self.stride > self.side:
            raise InvalidArgumentError("stride must satisfy 1 <= stride <= side")
        if self.border_policy not in ("shrink", "reflect"):
            raise InvalidArgumentError(f"unknown border policy {self.border_policy!r}")


def _window_values(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgumentError("window values must be finite and non-negative")
    return w


def moment_estimate(w) -> tuple[float, float]:
    """Moment estimator: returns (m_inv, omega_hat) for one sample window."""
    w = _window_values(w)
    if w.size < 2:
        raise InvalidArgumentError("need at least 2 samples")
    x = w * w
    omega_hat = float(x.mean())
    var = float(np.mean((x - omega_hat) ** 2))
    if var <= VAR_REL_MIN * max(omega_hat * omega_hat, 1e-300):
        raise DegenerateWindowError("zero variance of squared amplitudes")
    return omega_hat * omega_hat / var, omega_hat


def _log_moment_gap(w) -> float:
    w = _window_values(w)
    if w.size < 2:
        raise InvalidArgumentError("need at least 2 samples")
    if np.any(w <= 0):
        raise DomainError("MLE estimators require strictly positive amplitudes")
    x = w * w
    delta = float(np.log(x.mean()) - np.mean(np.log(x)))
    if delta <= DELTA_MIN:
        raise DegenerateWindowError("log-moment gap is zero (constant window)")
    return delta


def mle_taylor(w) -> float:
    """Taylor-approximate maximum-likelihood shape estimate, 1 / (2 delta)."""
    return 1.0 / (2.0 * _log_moment_gap(w))


def mle_exact(w, *, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Exact ML estimate: solves log(m) - psi(m) = delta by safeguarded Newton.

    The residual of the returned root is below 1e-10; raises NumericError on
    non-convergence. Serves as the oracle for mle_taylor's approximation error.
    """
    delta = _log_moment_gap(w)
    m = float(_solve_log_digamma(np.asarray([delta]), tol=tol, max_iter=max_iter)[0])
    return m


def _solve_log_digamma(delta: np.ndarray, *, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Vectorized root solve of f(m) = log(m) - psi(m) - delta = 0.

    f is strictly decreasing in m with range (0, inf), so the root is unique.
    Newton from the Taylor start 1/(2 delta), safeguarded by bisection on a
    bracket grown around the start.
    """
    delta = np.asarray(delta, dtype=float)
    m = 1.0 / (2.0 * delta)
    lo = m / 16.0
    hi = m * 16.0

    def f(v):
        return np.log(v) - special.digamma(v) - delta

    # grow the bracket where needed (f(lo) > 0 > f(hi) required)
    for _ in range(200):
        bad_lo = f(lo) <= 0
        bad_hi = f(hi) >= 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo / 4.0, lo)
        hi = np.where(bad_hi, hi * 4.0, hi)
    else:
        raise NumericError("could not bracket the ML root")

    for _ in range(max_iter):
        fm = f(m)
        if np.all(np.abs(fm) < tol):
            break
        lo = np.where(fm > 0, m, lo)
        hi = np.where(fm < 0, m, hi)
        fprime = 1.0 / m - special.polygamma(1, m)
        step = fm / fprime
        cand = m - step
        outside = (cand <= lo) | (cand >= hi)
        m = np.where(outside, 0.5 * (lo + hi), cand)
    fm = f(m)
    if not np.all(np.abs(fm) < 1e-10):
        raise NumericError("ML root solve did not converge to residual < 1e-10")
    return m


def _box_mean(img: np.ndarray, side: int, policy: str) -> tuple[np.ndarray, np.ndarray]:
    """Windowed mean of img and the per-pixel sample count.

    Under "shrink" the window is clipped at borders (count < side^2 there);
    under "reflect" the image is reflect-padded (count = side^2 everywhere).
    """
    if policy == "shrink":
        s = uniform_filter(img, size=side, mode="constant", cval=0.0) * side * side
        n = uniform_filter(np.ones_like(img), size=side, mode="constant", cval=0.0) * side * side
        n = np.round(n)
        return s / n, n
    mean = uniform_filter(img, size=side, mode="reflect")
    return mean, np.full_like(img, float(side * side))


def _apply_stride(field: np.ndarray, stride: int) -> np.ndarray:
    """Keep values on the stride grid, nearest-neighbor fill in between."""
    if stride == 1:
        return field
    h, w = field.shape
    ri = np.clip(np.round(np.arange(h) / stride) * stride, 0, h - 1).astype(int)
    ci = np.clip(np.round(np.arange(w) / stride) * stride, 0, w - 1).astype(int)
    return field[np.ix_(ri, ci)]


def sliding_map(
    img,
    spec: WindowSpec,
    estimator: str = "moment",
    *,
    clamp: tuple[float, float] = M_CLAMP,
) -> ParamMap:
    """Shape-parameter map from a sliding square window.

    Output has the same dimensions as the input; degenerate windows
    (zero variance / zero log-moment gap) are masked invalid. Estimates
    are clamped to the configured range.
    """
    img = check_envelope(img)
    if estimator not in ESTIMATORS:
        raise InvalidArgumentError(f"unknown estimator {estimator!r}")
    if min(img.shape) < spec.side:
        raise InvalidArgumentError("image smaller than the window")

    x = img * img
    mean_x, _ = _box_mean(x, spec.side, spec.border_policy)

    if estimator == "moment":
        mean_x2, _ = _box_mean(x * x, spec.side, spec.border_policy)
        var = mean_x2 - mean_x * mean_x
        degenerate = var <= VAR_REL_MIN * np.maximum(mean_x * mean_x, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(degenerate, np.nan, mean_x * mean_x / var)
    else:
        # floor zero amplitudes before the log; the score-free estimators
        # cannot digest exact zeros and isolated dark pixels are common
        floor = 1e-6 * max(float(img.max()), 1e-300)
        logx = np.log(np.maximum(x, floor * floor))
        mean_logx, _ = _box_mean(logx, spec.side, spec.border_policy)
        delta = np.log(np.maximum(mean_x, 1e-300)) - mean_logx
        degenerate = delta <= DELTA_MIN
        safe_delta = np.where(degenerate, 1.0, delta)
        if estimator == "mle_taylor":
            m = 1.0 / (2.0 * safe_delta)
        else:
            m = _solve_log_digamma(safe_delta.ravel()).reshape(img.shape)
        m = np.where(degenerate, np.nan, m)

    m = _apply_stride(m, spec.stride)
    degenerate = np.isnan(m)
    values = np.clip(np.where(degenerate, 0.0, m), clamp[0], clamp[1])
    meta = {"estimator": estimator, "window": spec.side, "stride": spec.stride,
            "border": spec.border_policy}
    return ParamMap(values, ~degenerate, meta)


def wmc_map(img, specs, *, clamp: tuple[float, float] = M_CLAMP) -> ParamMap:
    """Window-modulated compounding: pixel mean of moment maps over K windows.

    A pixel is masked only when it is masked in every constituent map;
    elsewhere the mean runs over the valid constituents.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise InvalidArgumentError("WMC needs at least two window specs")
    if len(set(specs)) == 1:
        # mean of K identical maps is that map, exactly
        pm = sliding_map(img, specs[0], "moment", clamp=clamp)
        pm.meta = {"estimator": "wmc", "windows": [s.side for s in specs]}
        return pm
    acc = None
    cnt = None
    for spec in specs:
        pm = sliding_map(img, spec, "moment", clamp=clamp)
        v = np.where(pm.mask, pm.values, 0.0)
        if acc is None:
            acc = v.copy()
            cnt = pm.mask.astype(float)
        else:
            acc += v
            cnt += pm.mask
    mask = cnt > 0
    values = np.where(mask, acc / np.maximum(cnt, 1.0), 0.0)
    meta = {"estimator": "wmc", "windows": [s.side for s in specs]}
    return ParamMap(values, mask, meta)
