"""Segmentation quality scoring: Dice and Jaccard overlap, per-ROI
aggregation with confidence intervals, and unpaired t-tests.

Overlap scores are computed from exact integer pixel counts.  Two empty
planes score 1.0 (agreement on absence); exactly one empty scores 0.0.
Confidence intervals are Student-t based and reported unclamped.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, EmptyInput, InsufficientSamples, PaletteMismatch
from .mask_core import BinaryPlane, LabelMap, plane


@dataclass(frozen=True)
class PairScore:
    class_id: int
    dsc: float
    iou: float
    intersection: int
    size_x: int
    size_y: int
    union: int
    both_empty: bool = False  # flagged so downstream averaging can exclude it


@dataclass(frozen=True)
class ReportRow:
    roi: str
    mean_dsc: float
    dsc_ci_low: float
    dsc_ci_high: float
    mean_iou: float
    iou_ci_low: float
    iou_ci_high: float
    n: int
    degenerate_ci: bool = False


@dataclass(frozen=True)
class TestResult:
    metric: str
    group_a: str
    group_b: str
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class MetricReport:
    rows: tuple
    tests: tuple = ()


def pair_score(x: BinaryPlane, y: BinaryPlane, class_id: int = 0) -> PairScore:
    """Dice and Jaccard overlap from exact pixel counts."""
    if (x.width, x.height) != (y.width, y.height):
        raise DimensionMismatch("planes differ in dimensions")
    inter = int(np.logical_and(x.bits, y.bits).sum())
    size_x = x.popcount()
    size_y = y.popcount()
    union = size_x + size_y - inter
    if size_x + size_y == 0:
        return PairScore(class_id, 1.0, 1.0, 0, 0, 0, 0, both_empty=True)
    dsc = 2.0 * inter / (size_x + size_y)
    iou = inter / union
    return PairScore(class_id, dsc, iou, inter, size_x, size_y, union)


def score_labelmaps(pred: LabelMap, gt: LabelMap, palette=None):
    """One PairScore per palette class, via per-class plane extraction."""
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise DimensionMismatch("label maps differ in dimensions")
    palette = palette or pred.palette
    if pred.palette != gt.palette:
        raise PaletteMismatch("label maps differ in palette")
    return [
        pair_score(plane(pred, c), plane(gt, c), class_id=c)
        for c in sorted(palette.class_ids)
    ]


def mean_ci(values, confidence=0.95):
    """Arithmetic mean and two-sided Student-t interval.

    Returns ``(mean, low, high, degenerate)``; n=1 collapses to
    [mean, mean] and is flagged.  Bounds are not clamped to [0, 1].
    """
    values = list(values)
    if not values:
        raise EmptyInput("no scores to aggregate")
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must be in (0, 1)")
    n = len(values)
    mean = float(np.mean(values))
    if n == 1:
        return mean, mean, mean, True
    s = float(np.std(values, ddof=1))
    tcrit = float(stats.t.ppf((1.0 + confidence) / 2.0, n - 1))
    half = tcrit * s / math.sqrt(n)
    return mean, mean - half, mean + half, False


def aggregate(scores, confidence=0.95, roi="roi"):
    """Aggregate per-image PairScores for one ROI into a report row."""
    scores = list(scores)
    if not scores:
        raise EmptyInput("no scores to aggregate")
    md, dlo, dhi, deg_d = mean_ci([s.dsc for s in scores], confidence)
    mi, ilo, ihi, deg_i = mean_ci([s.iou for s in scores], confidence)
    return ReportRow(roi, md, dlo, dhi, mi, ilo, ihi, len(scores), deg_d or deg_i)


def unpaired_t_test(group_a, group_b, variant="pooled"):
    """Two-sample t-test; pooled-variance Student by default, Welch by flag.

    Returns a :class:`TestResult` (names filled by the caller).  When both
    groups have zero variance: equal means give t=0, p=1; unequal means
    give |t|=inf with p at the float floor, flagged degenerate.
    """
    a = np.asarray(list(group_a), dtype=float)
    b = np.asarray(list(group_b), dtype=float)
    if a.size < 2 or b.size < 2:
        raise InsufficientSamples("each group needs at least 2 samples")
    if variant not in ("pooled", "welch"):
        raise ValueError(f"unknown t-test variant {variant!r}")
    na, nb = a.size, b.size
    ma, mb = float(a.mean()), float(b.mean())
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))

    if va == 0.0 and vb == 0.0:
        if ma == mb:
            df = na + nb - 2 if variant == "pooled" else float(na + nb - 2)
            return TestResult("", "a", "b", 0.0, float(df), 1.0, degenerate=True)
        t = math.inf if ma > mb else -math.inf
        return TestResult(
            "", "a", "b", t, float(na + nb - 2), 5e-324, degenerate=True
        )

    if variant == "pooled":
        df = na + nb - 2
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        t = (ma - mb) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    else:
        t = (ma - mb) / math.sqrt(va / na + vb / nb)
        df = (va / na + vb / nb) ** 2 / (
            (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
        )
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return TestResult("", "a", "b", float(t), float(df), p)


def report_to_csv(report: MetricReport) -> str:
    """UTF-8 CSV with one row per ROI."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["roi", "mean_dsc", "dsc_lo", "dsc_hi", "mean_iou", "iou_lo", "iou_hi", "n"])
    for r in report.rows:
        w.writerow(
            [
                r.roi,
                f"{r.mean_dsc:.6f}",
                f"{r.dsc_ci_low:.6f}",
                f"{r.dsc_ci_high:.6f}",
                f"{r.mean_iou:.6f}",
                f"{r.iou_ci_low:.6f}",
                f"{r.iou_ci_high:.6f}",
                r.n,
            ]
        )
    return buf.getvalue()


def report_to_table(report: MetricReport) -> str:
    """Fixed-width text table: mean DSC and IoU with CI per ROI."""
    lines = []
    header = f"{'ROI':<12}{'Mean DSC (95% CI)':<28}{'Mean IoU (95% CI)':<28}{'n':>4}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in report.rows:
        dsc = f"{r.mean_dsc:.4f} [{r.dsc_ci_low:.4f}, {r.dsc_ci_high:.4f}]"
        iou = f"{r.mean_iou:.4f} [{r.iou_ci_low:.4f}, {r.iou_ci_high:.4f}]"
        mark = " *" if r.degenerate_ci else ""
        lines.append(f"{r.roi:<12}{dsc:<28}{iou:<28}{r.n:>4}{mark}")
    if any(r.degenerate_ci for r in report.rows):
        lines.append("* degenerate CI (n=1)")
    for t in report.tests:
        lines.append(
            f"t-test [{t.metric}] {t.group_a} vs {t.group_b}: "
            f"t={t.t_statistic:.4f}, df={t.degrees_of_freedom:.1f}, p={t.p_value:.3g}"
        )
    return "\n".join(lines) + "\n"
