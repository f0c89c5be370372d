"""Evaluation mathematics: PSNR/RMSE, Pearson correlation, Welch test,
ROC/AUROC with fixed operating-point rules, and cohort reporting.

Conventions: higher score means the positive class (higher shape value in
fattier tissue); tied score pairs contribute half credit to the AUROC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidArgumentError

PSNR_MAX_DEFAULT = 2.0  # top of the ground-truth shape range
STAGE_THRESHOLDS = (5.0, 15.0)  # reference-value cuts: normal / mild / severe
STAGES = ("normal", "mild", "severe")
COMPARISONS = {
    "normal-vs-mild": ("normal", "mild"),
    "mild-vs-severe": ("mild", "severe"),
    "normal-vs-severe": ("normal", "severe"),
}


def rmse(a, b, mask=None) -> float:
    """Root-mean-square difference over the (optional) mask."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError("shape mismatch")
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape or not mask.any():
        raise InvalidArgumentError("mask must match shapes and be non-empty")
    d = a[mask] - b[mask]
    return float(np.sqrt(np.mean(d * d)))


def psnr(a, b, mask=None, max_value: float = PSNR_MAX_DEFAULT) -> float:
    """Peak signal-to-noise ratio 10 log10(max^2 / MSE); +inf for MSE = 0."""
    r = rmse(a, b, mask)
    if r == 0.0:
        return math.inf
    return float(10.0 * np.log10(max_value * max_value / (r * r)))


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson correlation and its two-sided p-value.

    Significance via the t-transform t = r sqrt((n-2)/(1-r^2)) with n-2
    degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise InvalidArgumentError("need two 1-D vectors of equal length >= 3")
    xd = x - x.mean()
    yd = y - y.mean()
    sxx = float(np.sum(xd * xd))
    syy = float(np.sum(yd * yd))
    if sxx == 0.0 or syy == 0.0:
        raise InvalidArgumentError("undefined correlation: zero variance")
    cov = float(np.sum(xd * yd))
    r = cov / (math.sqrt(sxx) * math.sqrt(syy))
    # exact affine relations must give exactly +/-1; the sqrts round, so
    # detect zero residuals of the least-squares line directly
    slope = cov / sxx
    if float(np.max(np.abs(yd - slope * xd))) == 0.0:
        r = math.copysign(1.0, slope)
    r = max(-1.0, min(1.0, r))
    n = x.size
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    return r, p


def welch_test(a, b) -> tuple[float, float]:
    """Unequal-variance two-sample t statistic and two-sided p-value.

    Degrees of freedom by Welch-Satterthwaite.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InvalidArgumentError("each group needs at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("groups must be finite")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    na, nb = a.size, b.size
    se2 = va / na + vb / nb
    if se2 == 0.0:
        # identical constant groups: no evidence of difference
        return 0.0, 1.0
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = float(2.0 * stats.t.sf(abs(t), df=df))
    return t, p


def significance_stars(p: float) -> str:
    """Conventional star buckets at 0.05 / 0.01 / 0.001 / 0.0001."""
    for stars, cut in (("****", 1e-4), ("***", 1e-3), ("**", 1e-2), ("*", 5e-2)):
        if p < cut:
            return stars
    return "ns"


@dataclass
class OperatingPoint:
    rule: str
    threshold: float
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    f1: float


@dataclass
class RocSummary:
    auroc: float
    operating_points: list[OperatingPoint] = field(default_factory=list)

    def point(self, rule: str) -> OperatingPoint:
        for op in self.operating_points:
            if op.rule == rule:
                return op
        raise KeyError(rule)


def _rates_at(scores: np.ndarray, labels: np.ndarray, thr: float) -> OperatingPoint:
    pred = scores >= thr
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    sens = tp / (tp + fn) if tp + fn else 0.0
    spec = tn / (tn + fp) if tn + fp else 0.0
    ppv = tp / (tp + fp) if tp + fp else 0.0
    npv = tn / (tn + fn) if tn + fn else 0.0
    f1 = 2 * ppv * sens / (ppv + sens) if ppv + sens else 0.0
    return OperatingPoint("", float(thr), sens, spec, ppv, npv, f1)


def roc_analysis(scores, labels) -> RocSummary:
    """AUROC by the rank (Mann-Whitney) formulation plus three operating points.

    Rules: "optimal-f1" maximizes F1 over distinct thresholds; "spec-90"
    takes the smallest threshold reaching specificity >= 0.90; "sens-90"
    the largest threshold keeping sensitivity >= 0.90. Predictions are
    positive at score >= threshold.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InvalidArgumentError("scores and labels must be 1-D of equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise InvalidArgumentError("both classes must be present")

    ranks = stats.rankdata(scores)  # average ranks give ties half credit
    auroc = float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))

    thresholds = np.unique(scores)
    points = [_rates_at(scores, labels, t) for t in thresholds]

    from dataclasses import replace

    best = max(range(len(points)), key=lambda i: (points[i].f1, -thresholds[i]))
    opt = replace(points[best], rule="optimal-f1")

    spec_ok = [i for i, op in enumerate(points) if op.specificity >= 0.90]
    if spec_ok:
        spec90 = points[min(spec_ok, key=lambda i: thresholds[i])]
    else:  # threshold above every score: predict all negative
        spec90 = _rates_at(scores, labels, float(thresholds[-1]) + 1.0)
    spec90 = replace(spec90, rule="spec-90")

    sens_ok = [i for i, op in enumerate(points) if op.sensitivity >= 0.90]
    # the minimum threshold predicts everything positive, so sens_ok is never empty
    sens90 = replace(points[max(sens_ok, key=lambda i: thresholds[i])], rule="sens-90")

    return RocSummary(auroc, [opt, spec90, sens90])


@dataclass(frozen=True)
class CohortRecord:
    """One subject: scalar feature and its reference value (percent)."""

    subject: str
    feature: float
    reference: float

    @property
    def stage(self) -> str:
        lo, hi = STAGE_THRESHOLDS
        if self.reference < lo:
            return "normal"
        if self.reference < hi:
            return "mild"
        return "severe"


def box_stats(values) -> dict:
    """Median, quartiles, and Tukey whiskers (1.5 IQR, clipped to data)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise InvalidArgumentError("empty group")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = float(v[v >= q1 - 1.5 * iqr].min())
    hi = float(v[v <= q3 + 1.5 * iqr].max())
    return {"n": int(v.size), "q1": float(q1), "median": float(med),
            "q3": float(q3), "whisker_lo": lo, "whisker_hi": hi}


def cohort_report(records, comparisons=None) -> dict:
    """Stage-wise statistics for a cohort of (feature, reference) records.

    Returns per-stage box statistics plus, for every requested pairwise
    comparison, the ROC summary (positive = later stage) and the Welch
    p-value; comparisons with an empty stage are marked empty.
    """
    records = list(records)
    if comparisons is None:
        comparisons = list(COMPARISONS)
    groups = {s: np.array([r.feature for r in records if r.stage == s]) for s in STAGES}
    report = {
        "stages": {s: (box_stats(g) if g.size else None) for s, g in groups.items()},
        "comparisons": {},
    }
    for name in comparisons:
        lo_stage, hi_stage = COMPARISONS[name]
        lo_g, hi_g = groups[lo_stage], groups[hi_stage]
        if lo_g.size == 0 or hi_g.size == 0:
            report["comparisons"][name] = {"empty": True}
            continue
        scores = np.concatenate([lo_g, hi_g])
        labels = np.concatenate([np.zeros(lo_g.size, int), np.ones(hi_g.size, int)])
        roc = roc_analysis(scores, labels)
        t, p = welch_test(lo_g, hi_g) if min(lo_g.size, hi_g.size) >= 2 else (math.nan, math.nan)
        report["comparisons"][name] = {
            "empty": False,
            "roc": roc,
            "welch_t": t,
            "welch_p": p,
            "stars": significance_stars(p) if np.isfinite(p) else "n/a",
        }
    return report
