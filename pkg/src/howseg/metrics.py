"""Evaluation protocols: per-class IoU, subset mIoU, harmonic mean, reports.

The unknown class is excluded from every mIoU subset, but points predicted
unknown still count as false negatives for the ground-truth class they mask.
Ground-truth sentinel (-1) points are excluded everywhere.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import GT_UNLABELED, LabelSpace

SUBSETS = ("base", "novel", "all")


@dataclass
class ConfusionTally:
    """Per-class TP/FP/FN counts over the open-world space (unknown excluded)."""

    class_ids: np.ndarray   # evaluated class ids, ascending
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    base_count: int

    def __post_init__(self):
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.tp = np.asarray(self.tp, dtype=np.int64)
        self.fp = np.asarray(self.fp, dtype=np.int64)
        self.fn = np.asarray(self.fn, dtype=np.int64)

    def subset_ids(self, subset: str) -> np.ndarray:
        if subset == "base":
            return self.class_ids[self.class_ids < self.base_count]
        if subset == "novel":
            return self.class_ids[self.class_ids > self.base_count]
        if subset == "all":
            return self.class_ids
        raise ValueError(f"unknown subset {subset!r}; expected one of {SUBSETS}")

    def iou_of(self, class_id: int) -> float:
        """Per-class IoU; NaN when the class has no support or predictions."""
        i = int(np.searchsorted(self.class_ids, class_id))
        if i >= len(self.class_ids) or self.class_ids[i] != class_id:
            raise KeyError(class_id)
        denom = self.tp[i] + self.fp[i] + self.fn[i]
        if denom == 0:
            return math.nan
        return float(self.tp[i]) / float(denom)

    def merge(self, other: "ConfusionTally") -> "ConfusionTally":
        """Additive merge of two tallies over the same class layout."""
        if self.base_count != other.base_count or not np.array_equal(
            self.class_ids, other.class_ids
        ):
            raise ValueError("tallies cover different class sets")
        return ConfusionTally(
            class_ids=self.class_ids.copy(),
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            base_count=self.base_count,
        )


def tally_from_labels(pred: np.ndarray, gt: np.ndarray, base_count: int) -> ConfusionTally:
    """Build a confusion tally from predicted and ground-truth labels.

    Classes evaluated: all base ids plus every novel id (> base_count) seen
    in the ground truth or the predictions. The unknown id (== base_count)
    is never a class of its own.
    """
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ValueError("prediction / ground-truth shape mismatch")
    valid = gt != GT_UNLABELED
    pred = pred[valid]
    gt = gt[valid]

    novel = set(int(c) for c in np.unique(gt) if c > base_count)
    novel |= set(int(c) for c in np.unique(pred) if c > base_count)
    class_ids = np.asarray(sorted(set(range(base_count)) | novel), dtype=np.int64)

    tp = np.empty(class_ids.shape[0], dtype=np.int64)
    fp = np.empty_like(tp)
    fn = np.empty_like(tp)
    for i, c in enumerate(class_ids):
        pm = pred == c
        gm = gt == c
        tp[i] = int(np.sum(pm & gm))
        fp[i] = int(np.sum(pm & ~gm))
        fn[i] = int(np.sum(~pm & gm))
    return ConfusionTally(class_ids=class_ids, tp=tp, fp=fp, fn=fn, base_count=base_count)


def miou(tally: ConfusionTally, subset: str = "all") -> float:
    """Mean IoU over a class subset; zero-denominator classes are excluded."""
    ids = tally.subset_ids(subset)
    ious = [tally.iou_of(int(c)) for c in ids]
    ious = [v for v in ious if not math.isnan(v)]
    if not ious:
        raise ValueError(f"subset {subset!r} has no class with support or predictions")
    return float(sum(ious) / len(ious))


def excluded_classes(tally: ConfusionTally, subset: str = "all") -> tuple:
    """Class ids dropped from the subset mean for lack of any denominator."""
    ids = tally.subset_ids(subset)
    return tuple(int(c) for c in ids if math.isnan(tally.iou_of(int(c))))


def harmonic_mean(miou_b: float, miou_n: float) -> float:
    """Harmonic mean of base and novel mIoU; zero if either side is zero."""
    if miou_b < 0 or miou_n < 0:
        raise ValueError("mIoU values must be >= 0")
    if miou_b == 0 or miou_n == 0:
        return 0.0
    return 2.0 * miou_b * miou_n / (miou_b + miou_n)


def point_accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    """Fraction of ground-truth-labeled points predicted correctly."""
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    valid = gt != GT_UNLABELED
    if not np.any(valid):
        raise ValueError("no labeled points")
    return float(np.mean(pred[valid] == gt[valid]))


def map_to_scene_labels(
    point_labels: np.ndarray,
    space: LabelSpace,
    scene_novel_names: Sequence[str],
) -> np.ndarray:
    """Re-index session labels into the scene's ground-truth label space.

    Base and unknown ids coincide by construction. Session novel ids are
    matched to ground-truth novel ids by name; names absent from the scene
    map beyond the ground-truth range (so they never score as true
    positives).
    """
    point_labels = np.asarray(point_labels, dtype=np.int64)
    out = point_labels.copy()
    base = space.base_count
    gt_ids = {name: base + 1 + j for j, name in enumerate(scene_novel_names)}
    spill = base + 1 + len(scene_novel_names)
    for j, name in enumerate(space.novel_classes):
        session_id = base + 1 + j
        target = gt_ids.get(name)
        if target is None:
            target = spill
            spill += 1
        out[point_labels == session_id] = target
    return out


@dataclass
class RunReport:
    """One evaluation row; mIoU values are fractions in [0, 1]."""

    scene: str
    strategy: str
    budget: int
    clicks_used: int
    miou_b: float
    miou_n: Optional[float]
    miou_a: float
    hm: Optional[float]
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_COLUMNS = (
    "scene", "strategy", "budget", "clicks_used",
    "miou_b", "miou_n", "miou_a", "hm", "wall_time",
)


def write_reports_csv(reports: Iterable[RunReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for r in reports:
            writer.writerow(r.to_dict())


def reports_to_json(reports: Iterable[RunReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
