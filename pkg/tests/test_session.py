import numpy as np
import pytest

from howseg.model import SceneFrame, ValidationError
from howseg.sceneio import SynthSpec, generate_synthetic
from howseg.session import SessionConfig, apply_clicks, open_session, propagate

from conftest import two_blob_frame


@pytest.fixture(scope="module")
def synth_scene():
    return generate_synthetic(SynthSpec(seed=21))


@pytest.fixture(scope="module")
def opened(synth_scene):
    config = SessionConfig(initial_prototypes=10, seed=21)
    return open_session(synth_scene.frame, config, base_names=synth_scene.base_names)


class TestPropagate:
    def test_constant_field(self):
        labels = propagate(np.array([4, 4, 4]), np.array([0, 2, 1, 1]))
        assert labels.tolist() == [4, 4, 4, 4]

    def test_single_point_prototype(self):
        labels = propagate(np.array([1, 7]), np.array([0, 1]))
        assert labels[1] == 7

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 6))
        proto_labels = rng.integers(0, 9, size=k)
        assignment = rng.integers(0, k, size=30)
        out = propagate(proto_labels, assignment)
        for i in range(30):
            assert out[i] == proto_labels[assignment[i]]

    def test_bad_assignment_rejected(self):
        with pytest.raises(ValidationError):
            propagate(np.array([1]), np.array([0, 1]))


class TestOpenSession:
    def test_base_scene_matches_closed_argmax(self):
        scene = generate_synthetic(SynthSpec(novel_class_count=0, seed=4))
        state = open_session(
            scene.frame, SessionConfig(initial_prototypes=10, seed=4), scene.base_names
        )
        closed = np.argmax(scene.frame.closed_logits, axis=1)
        agreement = np.mean(state.prediction.point_labels == closed)
        assert agreement >= 0.99

    def test_novel_region_predicted_unknown(self, synth_scene, opened):
        frame = synth_scene.frame
        novel_mask = frame.gt_labels > frame.base_count
        labels = opened.prediction.point_labels[novel_mask]
        unknown = opened.label_space.unknown_id
        assert np.mean(labels == unknown) >= 0.99
        # and never a base class for points the closed head scores unknown
        closed = np.argmax(frame.closed_logits, axis=1)
        scored_unknown = novel_mask & (closed == frame.base_count)
        assert np.all(
            opened.prediction.point_labels[scored_unknown] == unknown
        )

    def test_single_point_scene(self):
        frame = SceneFrame(
            positions=np.zeros((1, 3)),
            raw_features=np.zeros((1, 2)),
            features=np.array([[1.0, 2.0]]),
            closed_logits=np.array([[0.2, 0.9, 0.1]]),
        )
        state = open_session(frame, SessionConfig(initial_prototypes=1, seed=0))
        assert state.prototypes.count == 1
        assert state.prediction.point_labels.tolist() == [1]

    def test_prototype_count_clamped_to_n(self):
        frame = SceneFrame(
            positions=np.zeros((3, 3)),
            raw_features=np.zeros((3, 1)),
            features=np.eye(3),
            closed_logits=np.tile([1.0, 0.0], (3, 1)),
        )
        state = open_session(frame, SessionConfig(initial_prototypes=30, seed=0))
        assert state.prototypes.count == 3

    def test_iteration_zero(self, opened):
        assert opened.iteration == 0
        assert len(opened.annotations) == 0

    def test_correspondence_consistency(self, opened):
        pred = opened.prediction
        assert np.array_equal(
            pred.point_labels, pred.prototype_labels[pred.correspondence]
        )


class TestApplyClicks:
    def test_novel_clicks_surface_in_output(self, synth_scene, opened):
        frame = synth_scene.frame
        picks = []
        for gid, name in ((7, "novel_0"), (8, "novel_1")):
            members = np.flatnonzero(frame.gt_labels == gid)
            picks.append((int(members[0]), name))
        state = apply_clicks(opened, picks)
        space = state.label_space
        labels = state.prediction.point_labels
        assert space.novel_classes == ("novel_0", "novel_1")
        for (point, name) in picks:
            assert labels[point] == space.id_of(name)
        assert set(np.unique(labels)) >= {space.id_of("novel_0"), space.id_of("novel_1")}

    def test_empty_batch_is_noop_refresh(self, opened):
        state = apply_clicks(opened, [])
        assert state.iteration == opened.iteration + 1
        assert np.array_equal(
            state.prediction.point_labels, opened.prediction.point_labels
        )
        assert state.prototypes is opened.prototypes

    def test_mixed_prototype_click_grows_count(self):
        frame = two_blob_frame()
        state = open_session(frame, SessionConfig(initial_prototypes=1, seed=0),
                             base_names=["a", "b"])
        before = state.prototypes.count
        state = apply_clicks(state, [(0, "blobA"), (40, "blobB")])
        assert state.prototypes.count > before
        labels = state.prediction.point_labels
        assert labels[0] == state.label_space.id_of("blobA")
        assert labels[40] == state.label_space.id_of("blobB")

    def test_click_on_unknown_rejected(self, opened):
        with pytest.raises(ValidationError):
            apply_clicks(opened, [(0, "unknown")])
        with pytest.raises(ValidationError):
            apply_clicks(opened, [(0, opened.label_space.unknown_id)])

    def test_out_of_range_index_rejected(self, opened):
        with pytest.raises(ValidationError):
            apply_clicks(opened, [(10**6, 0)])

    def test_base_click_by_name_or_id(self, synth_scene, opened):
        frame = synth_scene.frame
        members = np.flatnonzero(frame.gt_labels == 2)
        p = int(members[0])
        by_id = apply_clicks(opened, [(p, 2)])
        by_name = apply_clicks(opened, [(p, synth_scene.base_names[2])])
        assert by_id.prediction.point_labels[p] == 2
        assert np.array_equal(
            by_id.prediction.point_labels, by_name.prediction.point_labels
        )

    def test_reclick_overwrites(self, synth_scene, opened):
        frame = synth_scene.frame
        p = int(np.flatnonzero(frame.gt_labels == 7)[0])
        state = apply_clicks(opened, [(p, "novel_0")])
        state = apply_clicks(state, [(p, "renamed")])
        assert len(state.annotations) == 1
        assert state.prediction.point_labels[p] == state.label_space.id_of("renamed")

    def test_click_consistency_across_updates(self, synth_scene, opened):
        rng = np.random.default_rng(0)
        frame = synth_scene.frame
        state = opened
        clicked = {}
        for _ in range(6):
            p = int(rng.integers(0, frame.n))
            gid = int(frame.gt_labels[p])
            label = gid if gid < frame.base_count else f"novel_{gid - frame.base_count - 1}"
            if gid == frame.base_count:
                continue
            state = apply_clicks(state, [(p, label)])
            clicked[p] = state.annotations.label_of(p)
            for point, lab in clicked.items():
                assert state.prediction.point_labels[point] == lab

    def test_label_space_monotone(self, synth_scene, opened):
        frame = synth_scene.frame
        state = apply_clicks(
            opened, [(int(np.flatnonzero(frame.gt_labels == 7)[0]), "novel_0")]
        )
        count_after_first = state.label_space.novel_count
        state = apply_clicks(
            state, [(int(np.flatnonzero(frame.gt_labels == 8)[0]), "novel_1")]
        )
        assert state.label_space.novel_count >= count_after_first

    def test_determinism(self, synth_scene):
        frame = synth_scene.frame
        config = SessionConfig(initial_prototypes=10, seed=5)
        picks = [
            (int(np.flatnonzero(frame.gt_labels == 7)[0]), "novel_0"),
            (int(np.flatnonzero(frame.gt_labels == 2)[0]), 2),
        ]
        runs = []
        for _ in range(2):
            state = open_session(frame, config, synth_scene.base_names)
            state = apply_clicks(state, picks)
            runs.append(state.prediction.point_labels.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_eq18_consistency_after_every_update(self, synth_scene, opened):
        frame = synth_scene.frame
        state = opened
        rng = np.random.default_rng(3)
        for _ in range(3):
            p = int(rng.integers(0, frame.n))
            gid = int(frame.gt_labels[p])
            if gid == frame.base_count:
                continue
            label = gid if gid < frame.base_count else f"n{gid}"
            state = apply_clicks(state, [(p, label)])
            pred = state.prediction
            assert np.array_equal(
                pred.point_labels, pred.prototype_labels[pred.correspondence]
            )
