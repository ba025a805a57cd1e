"""Prototype construction, correspondence, and click-driven disambiguation.

Prototypes are unit-norm centroids in backbone feature space. Initialization
clusters category-augmented features (features + one-hot closed-world
predictions) and pools the original features per cluster. When clicks of
different classes land inside one prototype, disambiguation re-clusters that
prototype's members over distance-augmented features and replaces it with
per-class sub-prototypes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .clustering import kmeans
from .model import AnnotationSet, PrototypeSet, SceneFrame, ValidationError

log = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.5          # click-distance kernel width (meters)
DEFAULT_MAX_ROUNDS = 5       # hard cap on disambiguation fixpoint rounds


@dataclass
class AugmentedFeatures:
    rows: np.ndarray          # (m, f + a)
    augmentation_kind: str    # "category" | "distance"

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if not np.all(np.isfinite(self.rows)):
            raise ValidationError("augmented features contain non-finite values")
        if self.augmentation_kind not in ("category", "distance"):
            raise ValidationError(f"unknown augmentation kind {self.augmentation_kind!r}")


@dataclass
class Correspondence:
    """Hard point-to-prototype assignment by cosine similarity."""

    assignment: np.ndarray        # (n,) prototype index per point
    num_prototypes: int
    zero_norm_points: tuple = ()  # diagnostics: rows matched by raw dot product

    def indicator(self) -> np.ndarray:
        n = self.assignment.shape[0]
        out = np.zeros((n, self.num_prototypes), dtype=np.int64)
        out[np.arange(n), self.assignment] = 1
        return out

    def column_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_prototypes)


def l2_normalize(rows: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalization; zero rows pass through unchanged."""
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return rows / safe


def build_category_augmented(frame: SceneFrame) -> AugmentedFeatures:
    """Concatenate features with the one-hot closed-world argmax.

    Ties in the logits break to the lowest class index.
    """
    closed = np.asarray(frame.closed_logits, dtype=np.float64)
    pred = np.argmax(closed, axis=1)
    onehot = np.zeros_like(closed)
    onehot[np.arange(frame.n), pred] = 1.0
    rows = np.concatenate([np.asarray(frame.features, dtype=np.float64), onehot], axis=1)
    return AugmentedFeatures(rows=rows, augmentation_kind="category")


def init_prototypes(frame: SceneFrame, k: int, seed: int = 0) -> PrototypeSet:
    """Cluster category-augmented features, pool original features per cluster.

    Each prototype is the L2-normalized mean of the original (unaugmented)
    features over its cluster mask.
    """
    if k > frame.n:
        raise ValidationError(f"k={k} exceeds point count n={frame.n}")
    augmented = build_category_augmented(frame)
    result = kmeans(augmented.rows, k, seed=seed)
    feats = np.asarray(frame.features, dtype=np.float64)
    vectors = np.empty((k, feats.shape[1]), dtype=np.float64)
    for j in range(k):
        vectors[j] = feats[result.labels == j].mean(axis=0)
    return PrototypeSet(
        vectors=l2_normalize(vectors),
        member_counts=result.cluster_sizes,
        generation=0,
    )


def correspondence(frame: SceneFrame, prototypes: PrototypeSet) -> Correspondence:
    """Assign each point to its most cosine-similar prototype.

    Ties break to the lowest prototype index. Zero-norm feature rows skip
    normalization (raw dot product) and are reported in the diagnostics.
    Refreshes ``prototypes.member_counts`` to match the new assignment.
    """
    feats = np.asarray(frame.features, dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1)
    zero_rows = np.flatnonzero(norms == 0)
    if zero_rows.size:
        log.warning("correspondence: %d zero-norm feature rows", zero_rows.size)
    sims = l2_normalize(feats) @ prototypes.vectors.T
    assignment = np.argmax(sims, axis=1)
    corr = Correspondence(
        assignment=assignment.astype(np.int64),
        num_prototypes=prototypes.count,
        zero_norm_points=tuple(int(i) for i in zero_rows),
    )
    prototypes.member_counts[:] = corr.column_counts()
    return corr


def find_ambiguous(
    prototypes: PrototypeSet,
    corr: Correspondence,
    annotations: AnnotationSet,
) -> np.ndarray:
    """Indices of prototypes whose members carry >= 2 distinct click labels.

    Also refreshes ``prototypes.ambiguous_flags``.
    """
    labels_per_proto: dict[int, set] = {}
    for click in annotations:
        p = int(corr.assignment[click.point_index])
        labels_per_proto.setdefault(p, set()).add(click.label)
    flags = np.zeros(prototypes.count, dtype=bool)
    for p, labels in labels_per_proto.items():
        if len(labels) >= 2:
            flags[p] = True
    prototypes.ambiguous_flags[:] = flags
    return np.flatnonzero(flags)


def distance_map(
    frame: SceneFrame,
    member_indices: np.ndarray,
    annotation_indices: np.ndarray,
    sigma: float = DEFAULT_SIGMA,
) -> np.ndarray:
    """Gaussian kernel of 3-d distances from member points to annotations.

    Entry (i, j) = exp(-||pos_i - pos_j|| / (2 sigma^2)); values in (0, 1].
    """
    if sigma <= 0:
        raise ValidationError("sigma must be > 0")
    member_indices = np.asarray(member_indices, dtype=np.int64)
    annotation_indices = np.asarray(annotation_indices, dtype=np.int64)
    if not np.all(np.isin(annotation_indices, member_indices)):
        raise ValidationError("annotation indices must be a subset of member indices")
    pos = np.asarray(frame.positions, dtype=np.float64)
    diff = pos[member_indices][:, None, :] - pos[annotation_indices][None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return np.exp(-dist / (2.0 * sigma * sigma))


def _split_prototype(
    frame: SceneFrame,
    members: np.ndarray,
    clicks: list,
    sub_count: int,
    sigma: float,
    seed: int,
) -> np.ndarray:
    """Re-cluster one ambiguous prototype's members into sub-prototypes."""
    feats = np.asarray(frame.features, dtype=np.float64)[members]
    ann_points = np.asarray(sorted({c.point_index for c in clicks}), dtype=np.int64)

    if sub_count > members.shape[0]:
        # degenerate guard: one singleton cluster per annotated point plus a
        # remainder cluster for whatever is left
        log.warning("degenerate split: %d classes among %d members", sub_count, members.shape[0])
        groups = [np.asarray([p], dtype=np.int64) for p in ann_points]
        rest = members[~np.isin(members, ann_points)]
        if rest.size:
            groups.append(rest)
        vectors = [
            np.asarray(frame.features, dtype=np.float64)[g].mean(axis=0) for g in groups
        ]
        return l2_normalize(np.vstack(vectors))

    dmap = distance_map(frame, members, ann_points, sigma=sigma)
    augmented = AugmentedFeatures(
        rows=np.concatenate([feats, dmap], axis=1),
        augmentation_kind="distance",
    )
    result = kmeans(augmented.rows, sub_count, seed=seed)
    vectors = np.empty((sub_count, feats.shape[1]), dtype=np.float64)
    for j in range(sub_count):
        vectors[j] = feats[result.labels == j].mean(axis=0)
    return l2_normalize(vectors)


def disambiguate(
    frame: SceneFrame,
    prototypes: PrototypeSet,
    corr: Correspondence,
    annotations: AnnotationSet,
    seed: int = 0,
    sigma: float = DEFAULT_SIGMA,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> PrototypeSet:
    """Replace ambiguous prototypes with per-class sub-prototypes.

    Each ambiguous prototype is split into as many sub-prototypes as there
    are distinct click classes among its members, clustering over features
    concatenated with the click distance map. The pass repeats (recompute
    correspondence, re-detect ambiguity) until no ambiguous prototype remains
    or ``max_rounds`` elapse. Surviving prototypes are kept frozen; output
    order follows ascending original prototype index.
    """
    current = prototypes
    assignment = corr
    for _ in range(max_rounds):
        ambiguous = find_ambiguous(current, assignment, annotations)
        if ambiguous.size == 0:
            if current is prototypes:
                log.info("disambiguate: no ambiguous prototypes, nothing to do")
            return current

        clicks_by_proto: dict[int, list] = {int(p): [] for p in ambiguous}
        for click in annotations:
            p = int(assignment.assignment[click.point_index])
            if p in clicks_by_proto:
                clicks_by_proto[p].append(click)

        blocks = []
        for p in range(current.count):
            if not current.ambiguous_flags[p]:
                blocks.append(current.vectors[p : p + 1])
                continue
            clicks = clicks_by_proto[p]
            sub_count = len({c.label for c in clicks})
            members = np.flatnonzero(assignment.assignment == p)
            child_seed = int(
                np.random.SeedSequence([seed, p, current.generation]).generate_state(1)[0]
            )
            blocks.append(
                _split_prototype(frame, members, clicks, sub_count, sigma, child_seed)
            )

        vectors = np.vstack(blocks)
        current = PrototypeSet(
            vectors=vectors,
            member_counts=np.zeros(vectors.shape[0], dtype=np.int64),
            generation=current.generation + 1,
        )
        assignment = correspondence(frame, current)
    find_ambiguous(current, assignment, annotations)  # leave flags for diagnostics
    return current
