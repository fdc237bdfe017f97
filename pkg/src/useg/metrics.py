"""Reliability metrics over the (correct/incorrect x certain/uncertain) taxonomy.

Conventions: tp = incorrect & uncertain, fp = correct & uncertain,
tn = correct & certain, fn = incorrect & certain. A certain prediction
should be correct (npv), an incorrect prediction should be uncertain (tpr),
and ua is the overall accuracy of the certainty estimate itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import LabelMap
from .uncertainty import CertaintyMask


@dataclass(frozen=True)
class ReliabilityCounts:
    tp: int  # incorrect & uncertain
    fp: int  # correct & uncertain
    tn: int  # correct & certain
    fn: int  # incorrect & certain

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ReliabilityCounts") -> "ReliabilityCounts":
        return ReliabilityCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


def confusion(pred: LabelMap, truth: LabelMap, mask: CertaintyMask) -> ReliabilityCounts:
    """Count each pixel into exactly one of the four reliability cases."""
    if pred.labels.shape != truth.labels.shape or pred.labels.shape != mask.certain.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.labels.shape}, truth {truth.labels.shape},"
            f" mask {mask.certain.shape}"
        )
    correct = pred.labels == truth.labels
    certain = mask.certain
    return ReliabilityCounts(
        tp=int(np.count_nonzero(~correct & ~certain)),
        fp=int(np.count_nonzero(correct & ~certain)),
        tn=int(np.count_nonzero(correct & certain)),
        fn=int(np.count_nonzero(~correct & certain)),
    )


def npv(counts: ReliabilityCounts) -> float:
    """P(correct | certain) = tn / (tn + fn); nan with a warning if nothing is certain."""
    denom = counts.tn + counts.fn
    if denom == 0:
        warnings.warn("npv undefined: no certain pixels", stacklevel=2)
        return math.nan
    return counts.tn / denom


def tpr(counts: ReliabilityCounts) -> float:
    """P(uncertain | incorrect) = tp / (tp + fn); nan with a warning if nothing is incorrect."""
    denom = counts.tp + counts.fn
    if denom == 0:
        warnings.warn("tpr undefined: no incorrect pixels", stacklevel=2)
        return math.nan
    return counts.tp / denom


def ua(counts: ReliabilityCounts) -> float:
    """(tp + tn) / total: how often the certainty estimate matches correctness."""
    if counts.total == 0:
        raise ValueError("ua undefined on empty input")
    return (counts.tp + counts.tn) / counts.total


def iou(pred: LabelMap, truth: LabelMap, num_classes: int) -> tuple[list[float], float]:
    """Per-class intersection-over-union and their mean.

    Classes absent from both maps get nan and are excluded from the mean.
    """
    if pred.labels.shape != truth.labels.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.labels.shape}, truth {truth.labels.shape}"
        )
    per_class: list[float] = []
    for c in range(num_classes):
        p = pred.labels == c
        t = truth.labels == c
        union = int(np.count_nonzero(p | t))
        if union == 0:
            per_class.append(math.nan)
        else:
            per_class.append(int(np.count_nonzero(p & t)) / union)
    defined = [v for v in per_class if not math.isnan(v)]
    mean = sum(defined) / len(defined) if defined else math.nan
    return per_class, mean


def iou_from_areas(intersections: np.ndarray, unions: np.ndarray) -> tuple[list[float], float]:
    """Same convention as iou(), from pre-pooled per-class areas."""
    per_class = [
        (int(i) / int(u)) if u > 0 else math.nan
        for i, u in zip(intersections, unions)
    ]
    defined = [v for v in per_class if not math.isnan(v)]
    mean = sum(defined) / len(defined) if defined else math.nan
    return per_class, mean


def class_areas(pred: LabelMap, truth: LabelMap, num_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class intersection and union pixel counts (poolable across images)."""
    if pred.labels.shape != truth.labels.shape:
        raise ValueError("shape mismatch between pred and truth")
    inter = np.zeros(num_classes, dtype=np.int64)
    union = np.zeros(num_classes, dtype=np.int64)
    for c in range(num_classes):
        p = pred.labels == c
        t = truth.labels == c
        inter[c] = np.count_nonzero(p & t)
        union[c] = np.count_nonzero(p | t)
    return inter, union


@dataclass
class ReliabilityReport:
    """Counts plus the derived metrics; the metrics are recomputable from the counts."""

    counts: ReliabilityCounts
    npv: float
    tpr: float
    ua: float
    iou_per_class: list[float] = field(default_factory=list)
    mean_iou: float = math.nan

    @classmethod
    def from_counts(
        cls,
        counts: ReliabilityCounts,
        iou_per_class: list[float] | None = None,
        mean_iou: float = math.nan,
    ) -> "ReliabilityReport":
        return cls(
            counts=counts,
            npv=npv(counts),
            tpr=tpr(counts),
            ua=ua(counts),
            iou_per_class=list(iou_per_class or []),
            mean_iou=mean_iou,
        )

    def to_lines(self) -> list[str]:
        lines = [
            "REPORT1",
            f"tp={self.counts.tp}",
            f"fp={self.counts.fp}",
            f"tn={self.counts.tn}",
            f"fn={self.counts.fn}",
            f"npv={self.npv!r}",
            f"tpr={self.tpr!r}",
            f"ua={self.ua!r}",
            f"mean_iou={self.mean_iou!r}",
        ]
        for i, v in enumerate(self.iou_per_class):
            lines.append(f"iou_class_{i}={v!r}")
        return lines

    @classmethod
    def from_lines(cls, lines: list[str]) -> "ReliabilityReport":
        if not lines or lines[0].strip() != "REPORT1":
            raise ValueError("not a REPORT1 document")
        fields: dict[str, str] = {}
        for line in lines[1:]:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key] = value
        counts = ReliabilityCounts(
            tp=int(fields["tp"]),
            fp=int(fields["fp"]),
            tn=int(fields["tn"]),
            fn=int(fields["fn"]),
        )
        per_class = []
        i = 0
        while f"iou_class_{i}" in fields:
            per_class.append(float(fields[f"iou_class_{i}"]))
            i += 1
        return cls(
            counts=counts,
            npv=float(fields["npv"]),
            tpr=float(fields["tpr"]),
            ua=float(fields["ua"]),
            iou_per_class=per_class,
            mean_iou=float(fields["mean_iou"]),
        )


def aggregate(values: list[float]) -> tuple[float, float]:
    """Mean and population standard deviation, ignoring nan entries."""
    defined = [v for v in values if not math.isnan(v)]
    if not defined:
        return math.nan, math.nan
    arr = np.asarray(defined, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
