import tempfile
import time
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from core.exceptions import ParseError
from core.geometry import iou
from core.structures import BoundingBox, CameraTrackSet, Detection, detections_from_tracks
from ingest.config import RunConfig
from ingest.readers import parse_tracks
from ingest.writers import write_detections
from metrics.identity import id_metrics
from synth.generator import SceneSpec, generate_scene

from .compensation import DisplacementField, apply_compensation, parse_displacements, write_displacements
from .kalman import (
    KalmanState, box_to_measurement, kalman_predict, kalman_update, means_to_ltwh, multi_predict, multi_update,
    INITIAL_COVARIANCE, MEASUREMENT_NOISE,
)
from .overlap import greedy_match, track_overlap
from .prefilter import filter_detections
from .sort import SortTracker, associate, track_sort


def moving_object(frames, step=2.0, size=40.0, top=0.0, left=0.0, skip=()):
    return {
        frame: [Detection(frame, BoundingBox(left + step * (frame - 1), top, size, size), 0.9)]
        for frame in range(1, frames + 1) if frame not in skip
    }


def merge_frames(*sequences):
    merged = {}
    for frames in sequences:
        for frame, detections in frames.items():
            merged.setdefault(frame, []).extend(detections)
    return merged


def partition(tracks: CameraTrackSet):
    return {frozenset((frame, bbox) for frame, bbox in track.boxes) for track in tracks}


def drop_middle_frame(tracks: CameraTrackSet):
    """Per-frame detections of a track set with the middle box of every track removed."""
    frames = detections_from_tracks(tracks)
    for track in tracks:
        frame, bbox = track.boxes[len(track) // 2]
        frames[frame] = [d for d in frames[frame] if d.bbox != bbox]
    return frames


class OverlapTrackerTests(SimpleTestCase):

    def test_single_moving_object_keeps_one_id(self):
        tracks = track_overlap(moving_object(10))
        self.assertEqual(tracks.ids(), [1])
        self.assertEqual(len(tracks.by_id[1]), 10)

    def test_missed_frame_breaks_the_track(self):
        tracks = track_overlap(moving_object(10, skip={5}))
        self.assertEqual(tracks.ids(), [1, 2])
        self.assertEqual(tracks.by_id[1].frames, [1, 2, 3, 4])
        self.assertEqual(tracks.by_id[2].frames, [6, 7, 8, 9, 10])

    def test_two_distant_objects(self):
        frames = merge_frames(moving_object(8), moving_object(8, left=500.0))
        tracks = track_overlap(frames)
        self.assertEqual(len(tracks), 2)
        for track in tracks:
            self.assertEqual(len(track), 8)
            self.assertEqual(len({bbox.left >= 500 for _, bbox in track.boxes}), 1)

    def test_empty_input(self):
        self.assertEqual(len(track_overlap({})), 0)

    def test_every_detection_gets_one_id(self):
        frames = merge_frames(moving_object(6), moving_object(6, left=20.0, top=10.0), moving_object(6, step=-3, left=300))
        tracks = track_overlap(frames)
        self.assertEqual(tracks.num_boxes(), sum(len(v) for v in frames.values()))

    def test_greedy_prefers_highest_score(self):
        scores = np.array([[0.9, 0.8], [0.85, 0.3]])
        self.assertEqual(greedy_match(scores, [1, 2], 0.2), {0: 0, 1: 1})

    def test_equal_scores_go_to_the_lower_previous_id(self):
        scores = np.array([[0.5], [0.5]])
        self.assertEqual(greedy_match(scores, [7, 3], 0.2), {0: 1})

    def test_threshold_gates_matches(self):
        self.assertEqual(greedy_match(np.array([[0.19]]), [1], 0.2), {})

    def test_compensation_links_fast_motion(self):
        frames = moving_object(5, step=50.0)
        self.assertEqual(len(track_overlap(frames)), 5)
        field = DisplacementField({frame: {0: (50.0, 0.0)} for frame in range(1, 5)})
        self.assertEqual(len(track_overlap(frames, compensation=field)), 1)


class CompensationTests(SimpleTestCase):

    def test_zero_field_leaves_boxes(self):
        boxes = [BoundingBox(1, 2, 3, 4), BoundingBox(5, 6, 7, 8)]
        self.assertEqual(apply_compensation(boxes, DisplacementField(), 1), boxes)

    def test_shift_moves_left_edge(self):
        field = DisplacementField({3: {0: (5.0, 0.0)}})
        self.assertEqual(apply_compensation([BoundingBox(10, 0, 4, 4)], field, 3), [BoundingBox(15, 0, 4, 4)])

    def test_true_motion_gives_full_overlap(self):
        before, after = BoundingBox(10, 10, 30, 20), BoundingBox(17, 6, 30, 20)
        shifted = apply_compensation([before], DisplacementField({1: {0: (7.0, -4.0)}}), 1)[0]
        self.assertEqual(iou(shifted, after), 1.0)

    def test_reindexed_follows_filtering(self):
        field = DisplacementField({1: {0: (1.0, 0.0), 2: (2.0, 0.0)}})
        self.assertEqual(field.reindexed({1: [2]}).shift(1, 0), (2.0, 0.0))

    def test_file_round_trip(self):
        field = DisplacementField({1: {0: (1.5, -2.0)}, 4: {2: (0.25, 3.0)}})
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'flow.csv'
            write_displacements(field, path)
            self.assertEqual(parse_displacements(path), field)

    def test_header_is_required(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'flow.csv'
            path.write_text('1,0,1.0,2.0\n')
            with self.assertRaises(ParseError):
                parse_displacements(path)

    def test_undecodable_row_names_the_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'flow.csv'
            path.write_bytes(b'frame,det_index,dx,dy\n1,0,1.0,2.0\n2,0,\xff,2.0\n')
            with self.assertRaisesMessage(ParseError, 'invalid UTF-8 at line 3'):
                parse_displacements(path)


class PrefilterTests(SimpleTestCase):

    def test_confidence_bound_is_inclusive(self):
        frames = {1: [Detection(1, BoundingBox(0, 0, 10, 10), 0.5), Detection(1, BoundingBox(0, 0, 10, 10), 0.49)]}
        filtered = filter_detections(frames, min_confidence=0.5)
        self.assertEqual([d.confidence for d in filtered.frames[1]], [0.5])
        self.assertEqual(filtered.kept, {1: [0]})

    def test_aspect_range(self):
        frames = {1: [Detection(1, BoundingBox(0, 0, 40, 80)), Detection(1, BoundingBox(0, 0, 80, 40))]}
        filtered = filter_detections(frames, min_aspect_ratio=1.0, max_aspect_ratio=3.0)
        self.assertEqual([d.bbox.width for d in filtered.frames[1]], [80])
        self.assertEqual(filtered.kept, {1: [1]})

    def test_disabled_aspect_range_keeps_everything(self):
        frames = {1: [Detection(1, BoundingBox(0, 0, 1, 100))]}
        self.assertEqual(filter_detections(frames).frames, frames)


class KalmanTests(SimpleTestCase):

    def test_zero_velocity_is_a_fixed_point(self):
        box = BoundingBox(80, 80, 40, 40)
        state = kalman_predict(KalmanState.from_box(box))
        np.testing.assert_allclose(box_to_measurement(state.to_box()), [100, 100, 1600, 1], atol=1e-9)

    def test_velocity_advances_the_center(self):
        mean = np.zeros(7)
        mean[:4] = [100, 100, 1600, 1]
        mean[4] = 3.0
        state = KalmanState(mean, INITIAL_COVARIANCE)
        for step in range(1, 4):
            state = kalman_predict(state)
            self.assertAlmostEqual(state.mean[0], 100 + 3 * step)

    def test_predict_grows_uncertainty(self):
        state = KalmanState.from_box(BoundingBox(0, 0, 10, 10))
        for _ in range(5):
            predicted = kalman_predict(state)
            self.assertGreater(np.trace(predicted.covariance), np.trace(state.covariance))
            state = predicted

    def test_shrinking_area_stops_at_zero_velocity(self):
        mean = np.array([0, 0, 5.0, 1.0, 0, 0, -10.0])
        state = kalman_predict(KalmanState(mean, INITIAL_COVARIANCE))
        self.assertEqual(state.mean[6], 0.0)
        self.assertEqual(state.mean[2], 5.0)

    def test_repeated_updates_follow_the_scalar_recursion(self):
        state = KalmanState.from_box(BoundingBox(80, 80, 40, 40))
        target = BoundingBox(80.15, 79.9, 40, 40)
        z = box_to_measurement(target)
        expected = np.array(state.mean[:4])
        variance = np.diag(INITIAL_COVARIANCE)[:4].copy()
        noise = np.diag(MEASUREMENT_NOISE)
        for _ in range(20):
            state = kalman_update(state, target)
            gain = variance / (variance + noise)
            expected = expected + gain * (z - expected)
            variance = variance * noise / (variance + noise)
            np.testing.assert_allclose(state.mean[:4], expected, rtol=0, atol=1e-9)
        np.testing.assert_allclose(state.mean[:4], z, rtol=0, atol=1e-3)

    def test_update_with_the_prediction_changes_nothing(self):
        state = kalman_predict(KalmanState.from_box(BoundingBox(10, 20, 30, 15)))
        updated = kalman_update(state, state.to_box())
        np.testing.assert_allclose(updated.mean, state.mean, atol=1e-9)

    def test_update_shrinks_position_variance(self):
        state = kalman_predict(KalmanState.from_box(BoundingBox(10, 20, 30, 15)))
        updated = kalman_update(state, BoundingBox(12, 21, 30, 16))
        self.assertTrue(np.all(np.diag(updated.covariance)[:4] <= np.diag(state.covariance)[:4]))

    def test_stacked_steps_agree_with_single_steps(self):
        rng = np.random.default_rng(3)
        states = [KalmanState.from_box(BoundingBox(*rng.uniform(0, 500, 2), *rng.uniform(5, 200, 2)))
                  for _ in range(6)]
        states = [kalman_predict(kalman_update(s, BoundingBox(*rng.uniform(0, 500, 2), 40, 30))) for s in states]
        means = np.array([s.mean for s in states])
        covariances = np.array([s.covariance for s in states])

        predicted_means, predicted_covariances = multi_predict(means, covariances)
        for i, state in enumerate(states):
            expected = kalman_predict(state)
            np.testing.assert_allclose(predicted_means[i], expected.mean, atol=1e-9)
            np.testing.assert_allclose(predicted_covariances[i], expected.covariance, atol=1e-9)
            np.testing.assert_allclose(means_to_ltwh(predicted_means)[i], expected.to_box().as_ltwh(), atol=1e-9)

        targets = [BoundingBox(*rng.uniform(0, 500, 2), *rng.uniform(5, 200, 2)) for _ in states]
        updated_means, updated_covariances = multi_update(
            means, covariances, np.array([box_to_measurement(b) for b in targets])
        )
        for i, (state, target) in enumerate(zip(states, targets)):
            expected = kalman_update(state, target)
            np.testing.assert_allclose(updated_means[i], expected.mean, rtol=1e-9, atol=1e-6)
            np.testing.assert_allclose(updated_covariances[i], expected.covariance, rtol=1e-9, atol=1e-6)

    def test_covariance_stays_symmetric_psd(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            state = KalmanState.from_box(BoundingBox(*rng.uniform(0, 500, 2), *rng.uniform(5, 200, 2)))
            for _ in range(int(rng.integers(1, 15))):
                if rng.random() < 0.5:
                    state = kalman_predict(state)
                else:
                    state = kalman_update(state, BoundingBox(*rng.uniform(0, 500, 2), *rng.uniform(5, 200, 2)))
                np.testing.assert_array_equal(state.covariance, state.covariance.T)
                self.assertGreaterEqual(np.linalg.eigvalsh(state.covariance).min(), -1e-8)


class SortTrackerTests(SimpleTestCase):

    def test_one_frame_dropout_keeps_the_id(self):
        tracks = track_sort(moving_object(10, skip={5}), RunConfig().replace(sort_max_age=1))
        self.assertEqual(tracks.ids(), [1])
        self.assertEqual(len(tracks.by_id[1]), 9)

    def test_max_age_zero_breaks_on_dropout(self):
        tracks = track_sort(moving_object(10, skip={5}), RunConfig().replace(sort_max_age=0))
        self.assertEqual(len(tracks), 2)

    def test_empty_sequence(self):
        self.assertEqual(len(track_sort({})), 0)

    def test_crossing_objects_keep_their_ids(self):
        frames = merge_frames(
            moving_object(20, step=10.0, top=0.0),
            moving_object(20, step=-10.0, top=60.0, left=190.0),
        )
        tracks = track_sort(frames)
        self.assertEqual(len(tracks), 2)
        for track in tracks:
            self.assertEqual(len(track), 20)
            self.assertEqual(len({bbox.top for _, bbox in track.boxes}), 1)

    def test_min_hits_suppresses_first_boxes(self):
        tracks = track_sort(moving_object(6), RunConfig().replace(sort_min_hits=3))
        self.assertEqual(tracks.by_id[1].frames, [3, 4, 5, 6])

    def test_outputs_are_the_observed_detections(self):
        frames = moving_object(6, step=4.0)
        tracks = track_sort(frames)
        self.assertEqual([bbox for _, bbox in tracks.by_id[1].boxes], [frames[f][0].bbox for f in range(1, 7)])

    def test_compensation_links_fast_motion(self):
        frames = moving_object(5, step=50.0)
        self.assertEqual(len(track_sort(frames)), 5)
        field = DisplacementField({frame: {0: (50.0, 0.0)} for frame in range(1, 5)})
        self.assertEqual(len(track_sort(frames, compensation=field)), 1)

    def test_association_is_optimal(self):
        tracks = np.array([[0, 0, 10, 10], [6, 0, 10, 10]], dtype=float)
        detections = np.array([[4, 0, 10, 10], [9, 0, 10, 10]], dtype=float)
        matches, unmatched = associate(tracks, detections, 0.2)
        self.assertEqual(sorted(matches), [(0, 0), (1, 1)])
        self.assertEqual(unmatched, [])

    def test_tracker_ids_increase(self):
        tracker = SortTracker()
        first = tracker.step(1, [Detection(1, BoundingBox(0, 0, 10, 10)), Detection(1, BoundingBox(100, 0, 10, 10))])
        self.assertEqual([box.track_id for box in first], [1, 2])

    @tag('slow')
    def test_throughput(self):
        frames = {
            frame: [Detection(frame, BoundingBox(60.0 * (i % 25) + 0.5 * frame, 60.0 * (i // 25), 40, 40), 0.9)
                    for i in range(50)]
            for frame in range(1, 2001)
        }
        started = time.perf_counter()
        tracks = track_sort(frames)
        self.assertLess(time.perf_counter() - started, 10.0)
        self.assertEqual(len(tracks), 50)


class SyntheticSceneTrackingTests(SimpleTestCase):

    def setUp(self):
        self.truth = generate_scene(SceneSpec(num_cameras=2, num_identities=8, frames_per_camera=60, seed=4))

    def test_gap_bridging_on_synthetic_scene(self):
        config = RunConfig().replace(sort_max_age=1)
        for camera, gt in self.truth.cameras.items():
            frames = drop_middle_frame(gt)
            sort_tracks = track_sort(frames, config, camera=camera)
            overlap_tracks = track_overlap(frames, config.iou_match_threshold, camera=camera)
            self.assertEqual(len(sort_tracks), len(gt))
            self.assertEqual(len(overlap_tracks), 2 * len(gt))
            self.assertGreater(id_metrics(gt, sort_tracks).idf1, id_metrics(gt, overlap_tracks).idf1)

    def test_sort_without_memory_matches_overlap(self):
        config = RunConfig().replace(sort_max_age=0, sort_min_hits=1)
        for camera, gt in self.truth.cameras.items():
            frames = detections_from_tracks(gt)
            self.assertEqual(
                partition(track_sort(frames, config, camera=camera)),
                partition(track_overlap(frames, config.iou_match_threshold, camera=camera)),
            )
            self.assertEqual(partition(track_overlap(frames)), partition(gt))

    def test_deterministic(self):
        frames = detections_from_tracks(self.truth.cameras['c001'])
        self.assertEqual(track_sort(frames, camera='c001'), track_sort(frames, camera='c001'))


class TrackCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        truth = generate_scene(SceneSpec(num_cameras=1, num_identities=6, frames_per_camera=80,
                                         dropout_rate=0.1, seed=2))
        self.detections = self.tmp / 'c001.txt'
        write_detections(truth.detections['c001'], self.detections)

    def tearDown(self):
        self._tmp.cleanup()

    def track(self, method, *extra):
        out = StringIO()
        output = self.tmp / f"{method}.txt"
        call_command('track', '--detections', str(self.detections), '--method', method,
                     '--output', str(output), *extra, stdout=out)
        return out.getvalue(), parse_tracks(output, 'c001')

    def test_output_parses_back(self):
        summary, tracks = self.track('overlap')
        span = tracks.frame_span()
        self.assertIn(f"{len(tracks)} tracks, frames {span[0]}-{span[1]}", summary)

    def test_sort_bridges_dropouts(self):
        _, sort_tracks = self.track('sort')
        _, overlap_tracks = self.track('overlap')
        self.assertLess(len(sort_tracks), len(overlap_tracks))

    def test_flags_reach_the_tracker(self):
        _, tracks = self.track('sort', '--sort-min-hits', '1000')
        self.assertEqual(len(tracks), 0)

    def test_missing_file_names_the_path(self):
        with self.assertRaisesMessage(CommandError, 'missing.txt'):
            call_command('track', '--detections', str(self.tmp / 'missing.txt'),
                         '--output', str(self.tmp / 'out.txt'), stdout=StringIO())

    def test_undecodable_input_is_a_command_error(self):
        for name, content in (('latin.txt', b'1,-1,10,20,30,40,0.9,-1,-1,-1\n\xe9\n'),
                              ('nul.txt', b'1,-1,10,20,30,40,0.9,-1,-1,-1\x00\n')):
            path = self.tmp / name
            path.write_bytes(content)
            with self.subTest(name=name), self.assertRaisesMessage(CommandError, name):
                call_command('track', '--detections', str(path),
                             '--output', str(self.tmp / 'out.txt'), stdout=StringIO())

    def test_unknown_method(self):
        with self.assertRaises(CommandError):
            call_command('track', '--detections', str(self.detections), '--method', 'deepsort',
                         '--output', str(self.tmp / 'out.txt'), stdout=StringIO())
