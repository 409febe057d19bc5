"""Per-interval QBER/contrast series and stability statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .optics import ClickEvent
from .protocol import RoundClass, RoundTable

TRACKED = ("qber_sift_z", "qber_ctrl_x", "contrast_sift_z", "contrast_ctrl_x")
_WEIGHT = {
    "qber_sift_z": "sift_z_conclusive",
    "qber_ctrl_x": "ctrl_x_conclusive",
    "contrast_sift_z": "sift_z_conclusive",
    "contrast_ctrl_x": "ctrl_x_conclusive",
}


def rate(errors: int, total: int) -> float:
    """``errors / total``; NaN when nothing was counted."""
    return errors / total if total > 0 else math.nan


def matched_contrast(errors: int, total: int) -> float:
    """``(correct - wrong) / (correct + wrong)`` for deterministic rounds."""
    return (total - 2 * errors) / total if total > 0 else math.nan


@dataclass(frozen=True)
class IntervalStat:
    interval_index: int
    start_round: int
    n_rounds: int
    qber_sift_z: float
    qber_ctrl_x: float
    contrast_sift_z: float
    contrast_ctrl_x: float
    conclusive: int
    sift_z_conclusive: int
    sift_z_errors: int
    ctrl_x_conclusive: int
    ctrl_x_errors: int
    clicks: int


@dataclass
class Tally:
    """Integer counters per interval (arrays of equal length)."""

    start_round: np.ndarray
    n_rounds: np.ndarray
    conclusive: np.ndarray
    clicks: np.ndarray
    sift_z_conclusive: np.ndarray
    sift_z_errors: np.ndarray
    ctrl_x_conclusive: np.ndarray
    ctrl_x_errors: np.ndarray

    def total(self, name: str) -> int:
        return int(getattr(self, name).sum())


def tally(records: RoundTable, interval_rounds: int) -> Tally:
    if interval_rounds < 1:
        raise ValueError("interval_rounds must be >= 1")
    n = len(records)
    k = -(-n // interval_rounds)
    idx = np.arange(n) // interval_rounds
    conclusive = records.conclusive
    cls = records.pair_class
    err = records.error

    def count(mask):
        return np.bincount(idx, weights=mask, minlength=k).astype(np.int64)

    sz = conclusive & (cls == RoundClass.SIFT_Z)
    cx = conclusive & (cls == RoundClass.CTRL_X)
    starts = records.start + np.arange(k) * interval_rounds
    return Tally(
        start_round=starts,
        n_rounds=np.minimum(interval_rounds, records.start + n - starts),
        conclusive=count(conclusive),
        clicks=count(records.click != ClickEvent.NONE),
        sift_z_conclusive=count(sz),
        sift_z_errors=count(sz & err),
        ctrl_x_conclusive=count(cx),
        ctrl_x_errors=count(cx & err),
    )


def interval_series(records: RoundTable, interval_rounds: int) -> list[IntervalStat]:
    """Split rounds into consecutive intervals of ``interval_rounds`` (last may be short)."""
    t = tally(records, interval_rounds)
    out = []
    for i in range(t.n_rounds.size):
        sz, se = int(t.sift_z_conclusive[i]), int(t.sift_z_errors[i])
        cx, ce = int(t.ctrl_x_conclusive[i]), int(t.ctrl_x_errors[i])
        out.append(
            IntervalStat(
                interval_index=i,
                start_round=int(t.start_round[i]),
                n_rounds=int(t.n_rounds[i]),
                qber_sift_z=rate(se, sz),
                qber_ctrl_x=rate(ce, cx),
                contrast_sift_z=matched_contrast(se, sz),
                contrast_ctrl_x=matched_contrast(ce, cx),
                conclusive=int(t.conclusive[i]),
                sift_z_conclusive=sz,
                sift_z_errors=se,
                ctrl_x_conclusive=cx,
                ctrl_x_errors=ce,
                clicks=int(t.clicks[i]),
            )
        )
    return out


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    min: float
    max: float
    intervals: int


@dataclass(frozen=True)
class StabilityReport:
    qber_sift_z: MetricSummary
    qber_ctrl_x: MetricSummary
    contrast_sift_z: MetricSummary
    contrast_ctrl_x: MetricSummary

    def as_dict(self) -> dict:
        return {f.name: vars(getattr(self, f.name)) for f in fields(self)}


def _summary(values, weights) -> MetricSummary:
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = np.isfinite(v) & (w > 0)
    v, w = v[keep], w[keep]
    if v.size == 0:
        return MetricSummary(math.nan, math.nan, math.nan, math.nan, 0)
    mean = float(np.sum(w * v) / np.sum(w))
    std = float(math.sqrt(np.sum(w * (v - mean) ** 2) / np.sum(w)))
    # guard the min <= mean <= max invariant against last-ulp rounding
    mean = min(max(mean, float(v.min())), float(v.max()))
    return MetricSummary(mean, std, float(v.min()), float(v.max()), int(v.size))


def stability_report(series: list[IntervalStat]) -> StabilityReport:
    """Count-weighted mean, spread and range of each tracked metric across intervals.

    Weighting by conclusive counts makes the mean equal the whole-session
    value. Intervals without counts for a metric are skipped for that metric.
    """
    if not series:
        raise ValueError("stability report needs at least one interval")
    return StabilityReport(
        **{
            name: _summary(
                [getattr(s, name) for s in series], [getattr(s, _WEIGHT[name]) for s in series]
            )
            for name in TRACKED
        }
    )
