"""Simulated human annotators: batch and corrective click strategies.

Strategies mirror how a human would label: one click per (novel) class
placed at the density-dominant region of that class, or iterative corrective
clicks on the largest mis-segmented region, with a click budget and early
termination once no coherent error region remains.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .clustering import dbscan
from .metrics import map_to_scene_labels
from .model import GT_UNLABELED, SceneFrame, ValidationError
from .session import SessionState, apply_clicks

STRATEGIES = ("oncoc", "ococ", "iterative", "ioncoc")

DEFAULT_DBSCAN_EPS = 0.2    # matches a 0.02 m sampling grid: hand-sized patches
DEFAULT_DBSCAN_MIN_PTS = 10


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "ioncoc"
    budget: int = 20
    dbscan_eps: float = DEFAULT_DBSCAN_EPS
    dbscan_min_pts: int = DEFAULT_DBSCAN_MIN_PTS

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.kind!r}; expected {STRATEGIES}")
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if self.dbscan_eps <= 0 or self.dbscan_min_pts < 1:
            raise ValidationError("bad click-placement clustering parameters")


def _centroid_nearest(positions: np.ndarray, candidates: np.ndarray) -> int:
    """Candidate index nearest the candidates' positional centroid (lowest wins ties)."""
    pts = positions[candidates]
    centroid = pts.mean(axis=0)
    dist = np.einsum("ij,ij->i", pts - centroid, pts - centroid)
    return int(candidates[np.argmin(dist)])


def place_class_click(
    frame: SceneFrame,
    class_label: int,
    eps: float = DEFAULT_DBSCAN_EPS,
    min_pts: int = DEFAULT_DBSCAN_MIN_PTS,
) -> int:
    """Pick the click point for one class: centroid of its dominant cluster.

    The class's ground-truth points are density-clustered; the click goes to
    the member of the largest cluster closest to that cluster's positional
    centroid. If every point is noise, the centroid of all class points is
    used instead.
    """
    if frame.gt_labels is None:
        raise ValidationError("class click placement needs ground truth")
    members = np.flatnonzero(frame.gt_labels == class_label)
    if members.size == 0:
        raise ValidationError(f"class {class_label} absent from ground truth")
    positions = np.asarray(frame.positions, dtype=np.float64)
    result = dbscan(positions[members], eps, min_pts)
    if result.num_clusters == 0:
        return _centroid_nearest(positions, members)
    dominant = int(np.argmax(result.cluster_sizes))  # ties -> lowest cluster id
    in_cluster = members[result.cluster_ids == dominant]
    return _centroid_nearest(positions, in_cluster)


def place_corrective_click(
    frame: SceneFrame,
    point_labels: np.ndarray,
    eps: float = DEFAULT_DBSCAN_EPS,
    min_pts: int = DEFAULT_DBSCAN_MIN_PTS,
) -> Optional[tuple[int, int]]:
    """Click inside the largest mis-segmented region, or None to terminate.

    ``point_labels`` must already live in the ground-truth label space.
    Returns (point_index, ground-truth label); None when the mis-segmented
    points form no dense cluster, meaning no obvious error region remains.
    """
    if frame.gt_labels is None:
        raise ValidationError("corrective clicks need ground truth")
    point_labels = np.asarray(point_labels, dtype=np.int64)
    wrong = np.flatnonzero((point_labels != frame.gt_labels) & (frame.gt_labels != GT_UNLABELED))
    if wrong.size == 0:
        return None
    positions = np.asarray(frame.positions, dtype=np.float64)
    result = dbscan(positions[wrong], eps, min_pts)
    if result.num_clusters == 0:
        return None
    largest = int(np.argmax(result.cluster_sizes))
    in_cluster = wrong[result.cluster_ids == largest]
    point = _centroid_nearest(positions, in_cluster)
    return point, int(frame.gt_labels[point])


def _click_payload(
    label_id: int, base_count: int, novel_names: Sequence[str]
) -> Union[int, str]:
    """Ground-truth label -> click payload: base ids as ints, novels by name."""
    if label_id < base_count:
        return label_id
    j = label_id - base_count - 1
    if 0 <= j < len(novel_names):
        return novel_names[j]
    return f"novel_{j}"


def _gt_classes(frame: SceneFrame, novel_only: bool) -> np.ndarray:
    gt = frame.gt_labels
    present = np.unique(gt[gt != GT_UNLABELED])
    present = present[present != frame.base_count]  # unknown is not clickable
    if novel_only:
        present = present[present > frame.base_count]
    return present


def run_strategy(
    state: SessionState,
    spec: StrategySpec,
    novel_names: Sequence[str] = (),
) -> tuple[SessionState, int]:
    """Drive a session with one simulated annotator strategy.

    oncoc: one batch click per ground-truth novel class.
    ococ: one batch click per ground-truth class, base and novel.
    iterative: corrective clicks one at a time until budget or termination.
    ioncoc: the oncoc batch first, then iterative with the remaining budget.

    Returns the final state and the number of clicks spent (always <= budget).
    """
    frame = state.frame
    if frame.gt_labels is None:
        raise ValidationError("simulated strategies need ground truth")
    base_count = frame.base_count
    used = 0

    if spec.kind in ("oncoc", "ococ", "ioncoc"):
        classes = _gt_classes(frame, novel_only=spec.kind != "ococ")
        classes = classes[: spec.budget]
        batch = []
        for c in classes:
            point = place_class_click(frame, int(c), spec.dbscan_eps, spec.dbscan_min_pts)
            batch.append((point, _click_payload(int(c), base_count, novel_names)))
        if batch:
            state = apply_clicks(state, batch)
            used += len(batch)

    if spec.kind in ("iterative", "ioncoc"):
        while used < spec.budget:
            mapped = map_to_scene_labels(
                state.prediction.point_labels, state.label_space, novel_names
            )
            pick = place_corrective_click(frame, mapped, spec.dbscan_eps, spec.dbscan_min_pts)
            if pick is None:
                break
            point, gt_label = pick
            state = apply_clicks(state, [(point, _click_payload(gt_label, base_count, novel_names))])
            used += 1

    return state, used
