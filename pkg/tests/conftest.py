import logging

import numpy as np
import pytest

from howseg.model import SceneFrame


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    # conflict/degenerate warnings are expected in ablation-style tests
    logging.getLogger("howseg").setLevel(logging.ERROR)
    yield


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULT_LINES
    except ImportError:
        return
    if RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in RESULT_LINES:
            terminalreporter.write_line(line)


def random_frame(rng: np.random.Generator, n=None, d0=None, f=None, base=None,
                 with_gt=True, with_blocks=False) -> SceneFrame:
    n = n or int(rng.integers(1, 40))
    d0 = d0 or int(rng.integers(1, 5))
    f = f or int(rng.integers(1, 8))
    base = base or int(rng.integers(1, 5))
    gt = rng.integers(-1, base + 3, size=n).astype(np.int32) if with_gt else None
    blocks = rng.integers(0, 4, size=n).astype(np.int32) if with_blocks else None
    return SceneFrame(
        positions=rng.normal(size=(n, 3)),
        raw_features=rng.normal(size=(n, d0)),
        features=rng.normal(size=(n, f)),
        closed_logits=rng.normal(size=(n, base + 1)),
        gt_labels=gt,
        block_ids=blocks,
    )


def two_blob_frame(n_per_blob=40, feature_dim=4, blob_distance=10.0,
                   feature_offset=0.6, seed=0) -> SceneFrame:
    """Two spatially separated blobs with subtly different features.

    Useful for disambiguation tests: the feature gap is small enough that a
    single prototype plausibly merges the blobs, yet large enough that the
    pooled sub-prototypes stay cosine-separable after a spatial split.
    """
    rng = np.random.default_rng(seed)
    n = 2 * n_per_blob
    positions = np.concatenate([
        rng.normal(scale=0.1, size=(n_per_blob, 3)),
        rng.normal(scale=0.1, size=(n_per_blob, 3)) + np.array([blob_distance, 0, 0]),
    ])
    base_dir = np.ones(feature_dim)
    offset = np.zeros(feature_dim)
    offset[0] = feature_offset
    centers = np.concatenate([
        np.tile(base_dir, (n_per_blob, 1)),
        np.tile(base_dir + offset, (n_per_blob, 1)),
    ])
    features = centers + rng.normal(scale=0.02, size=(n, feature_dim))
    logits = np.zeros((n, 3))
    logits[:, 2] = 5.0  # everything scores unknown
    gt = np.concatenate([
        np.full(n_per_blob, 3, dtype=np.int32),
        np.full(n_per_blob, 4, dtype=np.int32),
    ])
    return SceneFrame(
        positions=positions,
        raw_features=positions.copy(),
        features=features,
        closed_logits=logits,
        gt_labels=gt,
    )
