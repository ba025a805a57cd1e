"""Scene container format, block stitching, and the synthetic generator.

The ``.hows`` container is a little-endian binary layout carrying one scene:
header, float32 payload arrays in declared order, then a string table of
class names (base names first, ground-truth novel names after). See
docs/format.md for the byte-level layout.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import SceneFrame, ValidationError

log = logging.getLogger(__name__)

MAGIC = b"HOWS"
VERSION = 1
FLAG_GT = 1
FLAG_BLOCKS = 2
DEFAULT_MAX_BLOCKS = 16

_HEADER = struct.Struct("<4sIIIIII")  # magic, version, n, d0, f, base_count, flags


class SceneFormatError(Exception):
    """Container-level error with a stable machine-readable code."""

    code = "format_error"


class BadMagicError(SceneFormatError):
    code = "bad_magic"


class VersionMismatchError(SceneFormatError):
    code = "version_mismatch"


class TruncatedPayloadError(SceneFormatError):
    code = "truncated_payload"


class TrailingDataError(SceneFormatError):
    code = "trailing_data"


class LoadedScene(NamedTuple):
    frame: SceneFrame
    base_names: tuple
    novel_names: tuple


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedPayloadError(f"expected {count} bytes, got {len(data)}")
    return data


def write_scene(
    target,
    frame: SceneFrame,
    base_names: Sequence[str],
    novel_names: Sequence[str] = (),
) -> None:
    """Serialize one frame plus its class names to a path or binary stream."""
    base_names = [str(s) for s in base_names]
    novel_names = [str(s) for s in novel_names]
    if len(base_names) != frame.base_count:
        raise ValidationError(
            f"{len(base_names)} base names for {frame.base_count} base classes"
        )

    flags = 0
    if frame.gt_labels is not None:
        flags |= FLAG_GT
    if frame.block_ids is not None:
        flags |= FLAG_BLOCKS

    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "wb") if own else target
    try:
        fh.write(
            _HEADER.pack(
                MAGIC,
                VERSION,
                frame.n,
                frame.raw_features.shape[1],
                frame.feature_dim,
                frame.base_count,
                flags,
            )
        )
        fh.write(np.ascontiguousarray(frame.positions, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(frame.raw_features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(frame.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(frame.closed_logits, dtype="<f4").tobytes())
        if frame.gt_labels is not None:
            fh.write(np.ascontiguousarray(frame.gt_labels, dtype="<i4").tobytes())
        if frame.block_ids is not None:
            fh.write(np.ascontiguousarray(frame.block_ids, dtype="<i4").tobytes())
        names = base_names + novel_names
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
    finally:
        if own:
            fh.close()


def read_scene(source) -> LoadedScene:
    """Parse a ``.hows`` container from a path, bytes, or binary stream."""
    if isinstance(source, (bytes, bytearray)):
        fh = io.BytesIO(source)
        own = False
    elif isinstance(source, str) or hasattr(source, "__fspath__"):
        fh = open(source, "rb")
        own = True
    else:
        fh = source
        own = False
    try:
        header = _read_exact(fh, _HEADER.size)
        magic, version, n, d0, f, base_count, flags = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if version != VERSION:
            raise VersionMismatchError(f"unsupported version {version}")

        def read_array(cols: int, dtype: str, flat: bool = False) -> np.ndarray:
            raw = _read_exact(fh, n * cols * 4)
            arr = np.frombuffer(raw, dtype=dtype)
            return arr if flat else arr.reshape(n, cols)

        positions = read_array(3, "<f4")
        raw_features = read_array(d0, "<f4")
        features = read_array(f, "<f4")
        closed_logits = read_array(base_count + 1, "<f4")
        gt = read_array(1, "<i4", flat=True) if flags & FLAG_GT else None
        blocks = read_array(1, "<i4", flat=True) if flags & FLAG_BLOCKS else None

        (name_count,) = struct.unpack("<I", _read_exact(fh, 4))
        names = []
        for _ in range(name_count):
            (length,) = struct.unpack("<I", _read_exact(fh, 4))
            names.append(_read_exact(fh, length).decode("utf-8"))
        if name_count < base_count:
            raise TruncatedPayloadError(
                f"string table holds {name_count} names for {base_count} base classes"
            )
        if fh.read(1):
            raise TrailingDataError("unexpected bytes after string table")

        frame = SceneFrame(
            positions=positions,
            raw_features=raw_features,
            features=features,
            closed_logits=closed_logits,
            gt_labels=gt,
            block_ids=blocks,
        )
        return LoadedScene(
            frame=frame,
            base_names=tuple(names[:base_count]),
            novel_names=tuple(names[base_count:]),
        )
    finally:
        if own:
            fh.close()


def stitch_blocks(frames: Sequence[SceneFrame], max_blocks: int = DEFAULT_MAX_BLOCKS) -> SceneFrame:
    """Concatenate block frames into one sub-scene, up to ``max_blocks``.

    World positions are preserved; ``block_ids`` records each point's source
    block. Ground truth is carried over only when every input has it.
    """
    if len(frames) < 1:
        raise ValidationError("nothing to stitch")
    if len(frames) > max_blocks:
        log.warning("stitching first %d of %d blocks", max_blocks, len(frames))
        frames = frames[:max_blocks]
    first = frames[0]
    for fr in frames[1:]:
        if (
            fr.raw_features.shape[1] != first.raw_features.shape[1]
            or fr.feature_dim != first.feature_dim
            or fr.base_count != first.base_count
        ):
            raise ValidationError("block dimension mismatch")
    all_gt = all(fr.gt_labels is not None for fr in frames)
    return SceneFrame(
        positions=np.concatenate([fr.positions for fr in frames]),
        raw_features=np.concatenate([fr.raw_features for fr in frames]),
        features=np.concatenate([fr.features for fr in frames]),
        closed_logits=np.concatenate([fr.closed_logits for fr in frames]),
        gt_labels=np.concatenate([fr.gt_labels for fr in frames]) if all_gt else None,
        block_ids=np.concatenate(
            [np.full(fr.n, i, dtype=np.int32) for i, fr in enumerate(frames)]
        ),
    )


@dataclass
class SynthSpec:
    """Recipe for a seeded synthetic scene with known ground truth.

    Each class occupies one spatial blob (uniform ball on a grid of centers)
    and one isotropic feature cluster with unit per-axis noise. Feature
    centroids sit at pairwise distance >= feature_separation * sqrt(2).
    Closed-world logits are scaled negative squared distances to the base
    centroids; the unknown logit grows with the distance to the nearest base
    centroid, crossing over so that novel-class points score highest on
    unknown once the separation is a few noise units.
    """

    base_class_count: int = 6
    novel_class_count: int = 2
    points_per_class: int = 200
    feature_dim: int = 16
    feature_separation: float = 8.0
    spatial_blob_radius: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.base_class_count < 1 or self.points_per_class < 1:
            raise ValidationError("class and point counts must be >= 1")
        if self.novel_class_count < 0:
            raise ValidationError("novel_class_count must be >= 0")
        if self.feature_separation < 0:
            raise ValidationError("feature_separation must be >= 0")
        if self.spatial_blob_radius <= 0:
            raise ValidationError("spatial_blob_radius must be > 0")
        total = self.base_class_count + self.novel_class_count
        if self.feature_dim < total:
            raise ValidationError(
                f"feature_dim {self.feature_dim} < class count {total}"
            )

    @property
    def total_classes(self) -> int:
        return self.base_class_count + self.novel_class_count


_LOGIT_JITTER = 0.05  # breaks argmax ties; negligible against separated margins


def generate_synthetic(spec: SynthSpec) -> LoadedScene:
    """Generate a fully seeded synthetic scene with ground truth."""
    rng = np.random.default_rng(spec.seed)
    base = spec.base_class_count
    total = spec.total_classes
    ppc = spec.points_per_class
    f = spec.feature_dim

    feat_centroids = np.zeros((total, f))
    feat_centroids[np.arange(total), np.arange(total)] = spec.feature_separation

    cols = max(1, math.ceil(math.sqrt(total)))
    spacing = max(4.0 * spec.spatial_blob_radius, 1.0)
    positions = np.empty((total * ppc, 3))
    features = np.empty((total * ppc, f))
    gt = np.empty(total * ppc, dtype=np.int32)
    for c in range(total):
        center = np.array([(c % cols) * spacing, (c // cols) * spacing, 0.0])
        direction = rng.normal(size=(ppc, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = spec.spatial_blob_radius * rng.random(ppc) ** (1.0 / 3.0)
        sl = slice(c * ppc, (c + 1) * ppc)
        positions[sl] = center + direction * radius[:, None]
        features[sl] = feat_centroids[c] + rng.normal(size=(ppc, f))
        gt[sl] = c if c < base else c + 1  # novel ids sit past the unknown slot

    d2 = (
        np.einsum("ij,ij->i", features, features)[:, None]
        - 2.0 * features @ feat_centroids[:base].T
        + np.einsum("ij,ij->i", feat_centroids[:base], feat_centroids[:base])[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    crossover = f + 0.75 * spec.feature_separation**2
    unknown = (d2.min(axis=1) - 2.0 * crossover) / f
    logits = np.concatenate([-d2 / f, unknown[:, None]], axis=1)
    logits += rng.normal(scale=_LOGIT_JITTER, size=logits.shape)

    raw = np.concatenate([positions, rng.normal(size=(total * ppc, 3))], axis=1)

    frame = SceneFrame(
        positions=positions,
        raw_features=raw,
        features=features,
        closed_logits=logits,
        gt_labels=gt,
    )
    return LoadedScene(
        frame=frame,
        base_names=tuple(f"base_{i}" for i in range(base)),
        novel_names=tuple(f"novel_{j}" for j in range(spec.novel_class_count)),
    )
