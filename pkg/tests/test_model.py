import numpy as np
import pytest

from howseg.model import (
    AnnotationSet,
    LabelSpace,
    Prediction,
    PrototypeSet,
    SceneFrame,
    ValidationError,
)

from conftest import random_frame


class TestLabelSpace:
    def test_first_novel_slot(self):
        space = LabelSpace([f"b{i}" for i in range(5)])
        assert space.unknown_id == 5
        assert space.register_novel("sofa") == 6  # base_count + 1

    def test_register_is_idempotent(self):
        space = LabelSpace(["a", "b"])
        first = space.register_novel("sofa")
        second = space.register_novel("sofa")
        assert first == second
        assert space.novel_count == 1

    def test_append_order(self):
        space = LabelSpace(["a", "b"])
        sofa = space.register_novel("sofa")
        window = space.register_novel("window")
        assert window == sofa + 1
        assert space.novel_classes == ("sofa", "window")

    def test_base_collision_rejected(self):
        space = LabelSpace(["wall", "floor"])
        with pytest.raises(ValidationError):
            space.register_novel("wall")
        with pytest.raises(ValidationError):
            space.register_novel("unknown")

    def test_ids_stable_across_serialization(self):
        space = LabelSpace(["a", "b", "c"])
        space.register_novel("x")
        space.register_novel("y")
        reloaded = LabelSpace.from_dict(space.to_dict())
        assert reloaded == space
        for name in ("a", "b", "c", "unknown", "x", "y"):
            assert reloaded.id_of(name) == space.id_of(name)

    def test_name_id_round_trip(self):
        space = LabelSpace(["a", "b"])
        space.register_novel("n1")
        for label_id in range(space.num_labels):
            assert space.id_of(space.name_of(label_id)) == label_id

    def test_unknown_not_base_or_novel(self):
        space = LabelSpace(["a"])
        space.register_novel("n")
        assert not space.is_base(space.unknown_id)
        assert not space.is_novel(space.unknown_id)
        assert space.num_labels == 3


class TestSceneFrame:
    def test_row_count_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            SceneFrame(
                positions=rng.normal(size=(5, 3)),
                raw_features=rng.normal(size=(4, 2)),
                features=rng.normal(size=(5, 3)),
                closed_logits=rng.normal(size=(5, 3)),
            )

    def test_gt_shape_checked(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            SceneFrame(
                positions=rng.normal(size=(5, 3)),
                raw_features=rng.normal(size=(5, 2)),
                features=rng.normal(size=(5, 3)),
                closed_logits=rng.normal(size=(5, 3)),
                gt_labels=np.zeros(4, dtype=np.int32),
            )

    def test_non_finite_rejected(self):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(5, 3))
        feats[2, 1] = np.nan
        with pytest.raises(ValidationError):
            SceneFrame(
                positions=rng.normal(size=(5, 3)),
                raw_features=rng.normal(size=(5, 2)),
                features=feats,
                closed_logits=rng.normal(size=(5, 3)),
            )

    def test_valid_frame_properties(self):
        frame = random_frame(np.random.default_rng(7), n=12, base=3)
        assert frame.n == 12
        assert frame.base_count == 3
        assert frame.closed_logits.shape == (12, 4)


class TestAnnotationSet:
    def test_later_click_overwrites(self):
        ann = AnnotationSet()
        ann.add(3, 1, iteration=1)
        ann.add(3, 2, iteration=2)
        assert len(ann) == 1
        assert ann.label_of(3) == 2
        # recency order: the surviving click is the latest
        assert ann.clicks[-1].label == 2

    def test_order_preserved(self):
        ann = AnnotationSet()
        ann.add(1, 5, 1)
        ann.add(2, 6, 1)
        ann.add(1, 7, 2)
        assert [c.point_index for c in ann.clicks] == [2, 1]

    def test_copy_is_independent(self):
        ann = AnnotationSet()
        ann.add(0, 1, 1)
        dup = ann.copy()
        dup.add(1, 2, 2)
        assert len(ann) == 1 and len(dup) == 2


class TestPrototypeSet:
    def test_unit_norm_enforced(self):
        with pytest.raises(ValidationError):
            PrototypeSet(vectors=np.array([[1.0, 1.0]]), member_counts=np.array([3]))

    def test_valid_set(self):
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        ps = PrototypeSet(vectors=v, member_counts=np.array([2, 3]))
        assert ps.count == 2
        assert not ps.ambiguous_flags.any()


class TestPrediction:
    def test_point_prototype_consistency_enforced(self):
        with pytest.raises(ValidationError):
            Prediction(
                point_labels=np.array([0, 1]),
                prototype_labels=np.array([1, 1]),
                prototype_probs=np.array([[0.5, 0.5], [0.5, 0.5]]),
                correspondence=np.array([0, 1]),
            )

    def test_probs_must_be_distributions(self):
        with pytest.raises(ValidationError):
            Prediction(
                point_labels=np.array([1]),
                prototype_labels=np.array([1]),
                prototype_probs=np.array([[0.5, 0.4]]),
                correspondence=np.array([0]),
            )
