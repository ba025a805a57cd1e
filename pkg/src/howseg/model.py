"""Shared domain types for the interactive open-world segmentation engine.

Label indexing convention (0-based): ids ``0 .. B-1`` are base classes,
id ``B`` is the reserved unknown class, and novel classes are appended at
``B+1, B+2, ...`` in first-registration order. The closed-world classifier
head therefore maps onto the prefix ``0 .. B`` of the open-world space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

UNKNOWN_NAME = "unknown"
GT_UNLABELED = -1  # sentinel for points without ground truth


class ValidationError(ValueError):
    """Raised when a domain object fails construction-time validation."""


class LabelSpace:
    """Open-world label bookkeeping: fixed base classes plus growable novels.

    Novel ids are append-only and never reused; re-registering an existing
    novel name returns its original id.
    """

    def __init__(self, base_classes: Sequence[str], unknown_name: str = UNKNOWN_NAME):
        base = tuple(str(c) for c in base_classes)
        if len(base) == 0:
            raise ValidationError("label space needs at least one base class")
        if len(set(base)) != len(base):
            raise ValidationError("duplicate base class names")
        if unknown_name in base:
            raise ValidationError(f"base classes may not include {unknown_name!r}")
        self.base_classes = base
        self.unknown_name = unknown_name
        self._novel: list[str] = []

    @property
    def base_count(self) -> int:
        return len(self.base_classes)

    @property
    def unknown_id(self) -> int:
        return len(self.base_classes)

    @property
    def novel_classes(self) -> tuple[str, ...]:
        return tuple(self._novel)

    @property
    def novel_count(self) -> int:
        return len(self._novel)

    @property
    def num_labels(self) -> int:
        """Total open-world label count: base + unknown + novel."""
        return len(self.base_classes) + 1 + len(self._novel)

    def register_novel(self, name: str) -> int:
        """Register a novel class name, returning its stable id.

        Idempotent for already-registered novel names. Names colliding with a
        base class (or the unknown name) are rejected: clicks on base classes
        use the base id directly.
        """
        name = str(name)
        if name in self.base_classes:
            raise ValidationError(f"{name!r} is a base class; use its base id")
        if name == self.unknown_name:
            raise ValidationError("the unknown class cannot be registered as novel")
        if not name:
            raise ValidationError("empty class name")
        if name in self._novel:
            return self.unknown_id + 1 + self._novel.index(name)
        self._novel.append(name)
        return self.unknown_id + len(self._novel)

    def id_of(self, name: str) -> int:
        if name == self.unknown_name:
            return self.unknown_id
        if name in self.base_classes:
            return self.base_classes.index(name)
        if name in self._novel:
            return self.unknown_id + 1 + self._novel.index(name)
        raise KeyError(name)

    def name_of(self, label_id: int) -> str:
        if 0 <= label_id < self.base_count:
            return self.base_classes[label_id]
        if label_id == self.unknown_id:
            return self.unknown_name
        j = label_id - self.unknown_id - 1
        if 0 <= j < len(self._novel):
            return self._novel[j]
        raise KeyError(label_id)

    def is_base(self, label_id: int) -> bool:
        return 0 <= label_id < self.base_count

    def is_novel(self, label_id: int) -> bool:
        return self.unknown_id < label_id < self.num_labels

    def all_names(self) -> tuple[str, ...]:
        return self.base_classes + (self.unknown_name,) + tuple(self._novel)

    def to_dict(self) -> dict:
        return {
            "base_classes": list(self.base_classes),
            "unknown_name": self.unknown_name,
            "novel_classes": list(self._novel),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSpace":
        space = cls(d["base_classes"], d.get("unknown_name", UNKNOWN_NAME))
        for name in d.get("novel_classes", []):
            space.register_novel(name)
        return space

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelSpace):
            return NotImplemented
        return (
            self.base_classes == other.base_classes
            and self.unknown_name == other.unknown_name
            and self._novel == other._novel
        )

    def __repr__(self) -> str:
        return f"LabelSpace(base={self.base_count}, novel={len(self._novel)})"


def _as_f32(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class SceneFrame:
    """One query sample: positions, backbone features, closed-world scores.

    ``closed_logits`` has ``base_count + 1`` columns, the last being the
    unknown class. ``gt_labels`` (when present) live in the full open-world
    space with ``-1`` marking unlabeled points.
    """

    positions: np.ndarray      # (n, 3) meters
    raw_features: np.ndarray   # (n, d0) backbone-input attributes
    features: np.ndarray       # (n, f) backbone output features
    closed_logits: np.ndarray  # (n, base_count + 1)
    gt_labels: Optional[np.ndarray] = None   # (n,) int, -1 sentinel
    block_ids: Optional[np.ndarray] = None   # (n,) int

    def __post_init__(self):
        object.__setattr__(self, "positions", _as_f32(self.positions, "positions"))
        object.__setattr__(self, "raw_features", _as_f32(self.raw_features, "raw_features"))
        object.__setattr__(self, "features", _as_f32(self.features, "features"))
        object.__setattr__(self, "closed_logits", _as_f32(self.closed_logits, "closed_logits"))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValidationError("positions must be (n, 3)")
        n = self.positions.shape[0]
        if n < 1:
            raise ValidationError("scene needs at least one point")
        for name in ("raw_features", "features", "closed_logits"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise ValidationError(f"{name} must be 2-d")
            if arr.shape[0] != n:
                raise ValidationError(f"{name} row count {arr.shape[0]} != n={n}")
        if self.features.shape[1] < 1:
            raise ValidationError("feature dimension must be >= 1")
        if self.closed_logits.shape[1] < 2:
            raise ValidationError("closed_logits needs >= 2 columns (base + unknown)")
        if self.gt_labels is not None:
            gt = np.asarray(self.gt_labels, dtype=np.int32)
            if gt.shape != (n,):
                raise ValidationError("gt_labels must be (n,)")
            object.__setattr__(self, "gt_labels", gt)
        if self.block_ids is not None:
            bid = np.asarray(self.block_ids, dtype=np.int32)
            if bid.shape != (n,):
                raise ValidationError("block_ids must be (n,)")
            object.__setattr__(self, "block_ids", bid)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def base_count(self) -> int:
        """Number of base classes implied by the closed-world head."""
        return self.closed_logits.shape[1] - 1

    @property
    def has_gt(self) -> bool:
        return self.gt_labels is not None


@dataclass(frozen=True)
class Click:
    point_index: int
    label: int
    iteration: int


class AnnotationSet:
    """Ordered sparse clicks, at most one per point (later clicks overwrite).

    Iteration order reflects application recency: oldest surviving click
    first, most recent last.
    """

    def __init__(self, clicks: Iterable[Click] = ()):
        self._order: list[Click] = []
        self._by_point: dict[int, Click] = {}
        for c in clicks:
            self.add(c.point_index, c.label, c.iteration)

    def add(self, point_index: int, label: int, iteration: int) -> Click:
        point_index = int(point_index)
        label = int(label)
        if point_index < 0:
            raise ValidationError("negative point index")
        if label < 0:
            raise ValidationError("negative label")
        click = Click(point_index, label, int(iteration))
        old = self._by_point.get(point_index)
        if old is not None:
            self._order.remove(old)
        self._by_point[point_index] = click
        self._order.append(click)
        return click

    @property
    def clicks(self) -> tuple[Click, ...]:
        return tuple(self._order)

    def label_of(self, point_index: int) -> Optional[int]:
        c = self._by_point.get(point_index)
        return None if c is None else c.label

    def points(self) -> tuple[int, ...]:
        return tuple(c.point_index for c in self._order)

    def copy(self) -> "AnnotationSet":
        return AnnotationSet(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def __iter__(self):
        return iter(self._order)


@dataclass
class PrototypeSet:
    """Unit-norm feature centroids with per-prototype bookkeeping.

    ``member_counts`` reflects the most recent correspondence computation;
    ``ambiguous_flags`` the most recent ambiguity detection. ``generation``
    counts disambiguation rounds applied since initialization.
    """

    vectors: np.ndarray                 # (K, f) float64, unit rows
    member_counts: np.ndarray           # (K,) int64
    ambiguous_flags: np.ndarray = None  # (K,) bool
    generation: int = 0

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValidationError("prototype vectors must be (K >= 1, f)")
        norms = np.linalg.norm(self.vectors, axis=1)
        bad = np.abs(norms - 1.0) > 1e-5
        if np.any(bad & (norms > 0)):
            raise ValidationError("prototype rows must have unit L2 norm")
        self.member_counts = np.asarray(self.member_counts, dtype=np.int64)
        if self.member_counts.shape != (self.count,):
            raise ValidationError("member_counts shape mismatch")
        if self.ambiguous_flags is None:
            self.ambiguous_flags = np.zeros(self.count, dtype=bool)
        else:
            self.ambiguous_flags = np.asarray(self.ambiguous_flags, dtype=bool)
            if self.ambiguous_flags.shape != (self.count,):
                raise ValidationError("ambiguous_flags shape mismatch")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class Prediction:
    """Per-point open-world labels plus the prototype-level quantities."""

    point_labels: np.ndarray      # (n,) int
    prototype_labels: np.ndarray  # (K,) int
    prototype_probs: np.ndarray   # (K, L) rows summing to 1
    correspondence: np.ndarray    # (n,) point -> prototype

    def __post_init__(self):
        self.point_labels = np.asarray(self.point_labels, dtype=np.int64)
        self.prototype_labels = np.asarray(self.prototype_labels, dtype=np.int64)
        self.prototype_probs = np.asarray(self.prototype_probs, dtype=np.float64)
        self.correspondence = np.asarray(self.correspondence, dtype=np.int64)
        k = self.prototype_labels.shape[0]
        if self.prototype_probs.shape[0] != k:
            raise ValidationError("prototype_probs row count mismatch")
        if self.point_labels.shape != self.correspondence.shape:
            raise ValidationError("point_labels / correspondence shape mismatch")
        if np.any(self.correspondence < 0) or np.any(self.correspondence >= k):
            raise ValidationError("correspondence index out of range")
        if not np.array_equal(self.point_labels, self.prototype_labels[self.correspondence]):
            raise ValidationError("point labels inconsistent with prototype labels")
        rowsum = self.prototype_probs.sum(axis=1)
        if np.any(np.abs(rowsum - 1.0) > 1e-6) or np.any(self.prototype_probs < 0):
            raise ValidationError("prototype_probs rows must be distributions")

    @property
    def num_prototypes(self) -> int:
        return self.prototype_labels.shape[0]
