"""Per-scene orchestration of the interactive open-world segmentation loop.

A session moves from closed-world ingestion to iteratively refined
open-world predictions: build prototypes once, then on every click batch
re-detect ambiguity, disambiguate, vote from the previous prediction,
calibrate with clicks, run CRF inference, and propagate prototype labels
back to points.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import crf, prototypes as proto
from .model import (
    AnnotationSet,
    LabelSpace,
    Prediction,
    PrototypeSet,
    SceneFrame,
    ValidationError,
)

ClickSpec = tuple[int, Union[int, str]]


@dataclass(frozen=True)
class SessionConfig:
    initial_prototypes: int = 30
    sigma: float = 0.5                 # click-distance kernel width (m)
    crf_lambda: float = 1.0            # unary/pairwise balance
    crf_delta: float = 1.0             # similarity bandwidth
    mf_iterations: int = 10
    seed: int = 0
    max_disambiguation_rounds: int = 5
    unary_floor: float = 1e-6
    enable_disambiguation: bool = True  # ablation switch

    def __post_init__(self):
        if self.initial_prototypes < 1 or self.mf_iterations < 0:
            raise ValidationError("counts must be >= 1 (mf_iterations >= 0)")
        if self.max_disambiguation_rounds < 1:
            raise ValidationError("max_disambiguation_rounds must be >= 1")
        if self.sigma <= 0 or self.crf_delta <= 0:
            raise ValidationError("sigma and delta must be > 0")
        if self.crf_lambda < 0:
            raise ValidationError("lambda must be >= 0")
        if not 0 < self.unary_floor < 1e-2:
            raise ValidationError("unary_floor must be a small positive probability")


@dataclass
class SessionState:
    frame: SceneFrame
    config: SessionConfig
    label_space: LabelSpace
    prototypes: PrototypeSet
    annotations: AnnotationSet
    prediction: Prediction
    iteration: int
    event_log: tuple = ()

    def log_event(self, event: str) -> tuple:
        return self.event_log + ((event, time.time()),)


def propagate(prototype_labels: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Give every point its prototype's label; pure relabeling."""
    prototype_labels = np.asarray(prototype_labels, dtype=np.int64)
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.size and (assignment.min() < 0 or assignment.max() >= prototype_labels.shape[0]):
        raise ValidationError("assignment index out of range")
    return prototype_labels[assignment]


def _label_pass(
    frame: SceneFrame,
    protos: PrototypeSet,
    corr: proto.Correspondence,
    source_labels: np.ndarray,
    source_label_count: int,
    space: LabelSpace,
    annotations: AnnotationSet,
    config: SessionConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Voting -> calibration -> mean field -> decode. Returns (Pl, Q)."""
    votes = crf.voting_matrix(source_labels, corr, source_label_count)
    votes = crf.augment_voting(votes, space.novel_count, space.unknown_id)
    unary = crf.unary_from_votes(votes, annotations, corr, eps=config.unary_floor)
    pairwise = crf.pairwise_from_prototypes(protos, delta=config.crf_delta, lam=config.crf_lambda)
    state = crf.mean_field(unary, pairwise, iters=config.mf_iterations)
    labels = crf.decode(state, unary)
    return labels, state.q


def open_session(
    frame: SceneFrame,
    config: SessionConfig = SessionConfig(),
    base_names: Optional[Sequence[str]] = None,
) -> SessionState:
    """Ingest a frame: initial prototypes, closed-world voting, first labels.

    With no clicks yet the label space holds only base classes plus unknown;
    points in unknown-labeled prototypes carry the unknown label.
    """
    if base_names is None:
        base_names = [f"class_{i}" for i in range(frame.base_count)]
    if len(base_names) != frame.base_count:
        raise ValidationError("base name count does not match the closed-world head")
    space = LabelSpace(base_names)

    k = min(config.initial_prototypes, frame.n)
    protos = proto.init_prototypes(frame, k, seed=config.seed)
    corr = proto.correspondence(frame, protos)

    closed_argmax = np.argmax(np.asarray(frame.closed_logits, dtype=np.float64), axis=1)
    annotations = AnnotationSet()
    labels, q = _label_pass(
        frame, protos, corr, closed_argmax, frame.base_count + 1, space, annotations, config
    )
    prediction = Prediction(
        point_labels=propagate(labels, corr.assignment),
        prototype_labels=labels,
        prototype_probs=q,
        correspondence=corr.assignment,
    )
    state = SessionState(
        frame=frame,
        config=config,
        label_space=space,
        prototypes=protos,
        annotations=annotations,
        prediction=prediction,
        iteration=0,
    )
    state.event_log = (("opened", time.time()),)
    return state


def _resolve_click_label(space: LabelSpace, label: Union[int, str]) -> int:
    """Map a click label (id or name) to an open-world id, registering novels."""
    if isinstance(label, str):
        if label == space.unknown_name:
            raise ValidationError("the unknown class is not clickable")
        if label in space.base_classes:
            return space.base_classes.index(label)
        return space.register_novel(label)
    label = int(label)
    if label == space.unknown_id:
        raise ValidationError("the unknown class is not clickable")
    if not 0 <= label < space.num_labels:
        raise ValidationError(f"label id {label} not registered; click by name instead")
    return label


def apply_clicks(state: SessionState, clicks: Sequence[ClickSpec]) -> SessionState:
    """Fold a batch of clicks into the session and refresh the prediction.

    Registers new novel names, overwrites earlier clicks on re-clicked
    points, disambiguates prototypes hit by conflicting classes, then
    re-labels: voting from the previous prediction, click calibration,
    mean-field inference, decode with hard click overrides, propagation.
    An empty batch is a no-op refresh: identical prediction, iteration + 1.
    """
    frame = state.frame
    config = state.config
    next_iteration = state.iteration + 1

    if len(clicks) == 0:
        new_state = SessionState(
            frame=frame,
            config=config,
            label_space=state.label_space,
            prototypes=state.prototypes,
            annotations=state.annotations,
            prediction=state.prediction,
            iteration=next_iteration,
        )
        new_state.event_log = state.log_event("refresh")
        return new_state

    space = state.label_space  # shared: novel registration is append-only
    annotations = state.annotations.copy()
    for point_index, label in clicks:
        point_index = int(point_index)
        if not 0 <= point_index < frame.n:
            raise ValidationError(f"point index {point_index} out of range")
        annotations.add(point_index, _resolve_click_label(space, label), next_iteration)

    protos = state.prototypes
    corr = proto.correspondence(frame, protos)
    if config.enable_disambiguation:
        if proto.find_ambiguous(protos, corr, annotations).size:
            protos = proto.disambiguate(
                frame,
                protos,
                corr,
                annotations,
                seed=config.seed,
                sigma=config.sigma,
                max_rounds=config.max_disambiguation_rounds,
            )
            corr = proto.correspondence(frame, protos)

    labels, q = _label_pass(
        frame,
        protos,
        corr,
        state.prediction.point_labels,
        state.prediction.prototype_probs.shape[1],
        space,
        annotations,
        config,
    )
    prediction = Prediction(
        point_labels=propagate(labels, corr.assignment),
        prototype_labels=labels,
        prototype_probs=q,
        correspondence=corr.assignment,
    )
    new_state = SessionState(
        frame=frame,
        config=config,
        label_space=space,
        prototypes=protos,
        annotations=annotations,
        prediction=prediction,
        iteration=next_iteration,
    )
    new_state.event_log = state.log_event(f"clicks:{len(clicks)}")
    return new_state
