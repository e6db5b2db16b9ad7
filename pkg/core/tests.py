import random

from django.test import SimpleTestCase

from .exceptions import InvalidBoxError, MissingEmbeddingError, ParseError
from .geometry import boxes_to_array, center, iou, iou_matrix
from .structures import (
    BoundingBox, CameraTrackSet, Detection, Track, TrackedBox, detections_from_tracks, group_by_frame,
)


def _box(left, top, width, height):
    return BoundingBox(left, top, width, height)


def _random_box(rng):
    return _box(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1, 60), rng.uniform(1, 60))


class BoundingBoxTests(SimpleTestCase):

    def test_rejects_non_positive_size(self):
        with self.assertRaises(InvalidBoxError):
            _box(0, 0, 0, 10)
        with self.assertRaises(InvalidBoxError):
            _box(0, 0, 10, -1)

    def test_rejects_non_finite_values(self):
        with self.assertRaises(InvalidBoxError):
            _box(float('nan'), 0, 10, 10)
        with self.assertRaises(ValueError):
            _box(0, float('inf'), 10, 10)

    def test_translated_keeps_size(self):
        moved = _box(10, 20, 30, 40).translated(5, -2)
        self.assertEqual(moved, _box(15, 18, 30, 40))

    def test_detection_confidence_range(self):
        with self.assertRaises(InvalidBoxError):
            Detection(1, _box(0, 0, 1, 1), 1.5)


class IouTests(SimpleTestCase):

    def test_identical_boxes(self):
        self.assertEqual(iou(_box(0, 0, 10, 10), _box(0, 0, 10, 10)), 1.0)

    def test_disjoint_boxes(self):
        self.assertEqual(iou(_box(0, 0, 10, 10), _box(20, 20, 5, 5)), 0.0)

    def test_half_shifted_box(self):
        self.assertAlmostEqual(iou(_box(0, 0, 10, 10), _box(5, 0, 10, 10)), 1 / 3, places=12)

    def test_touching_edges_give_zero(self):
        self.assertEqual(iou(_box(0, 0, 10, 10), _box(10, 0, 10, 10)), 0.0)

    def test_properties_on_random_pairs(self):
        rng = random.Random(7)
        for _ in range(500):
            a, b = _random_box(rng), _random_box(rng)
            value = iou(a, b)
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
            self.assertAlmostEqual(value, iou(b, a), places=12)
            dx, dy = rng.uniform(-100, 100), rng.uniform(-100, 100)
            self.assertAlmostEqual(value, iou(a.translated(dx, dy), b.translated(dx, dy)), places=9)
            self.assertEqual(iou(a, a), 1.0)

    def test_matrix_agrees_with_scalar(self):
        rng = random.Random(11)
        left = [_random_box(rng) for _ in range(6)]
        right = [_random_box(rng) for _ in range(4)]
        matrix = iou_matrix(boxes_to_array(left), boxes_to_array(right))
        self.assertEqual(matrix.shape, (6, 4))
        for i, a in enumerate(left):
            for j, b in enumerate(right):
                self.assertAlmostEqual(matrix[i, j], iou(a, b), places=12)

    def test_matrix_of_empty_input(self):
        self.assertEqual(iou_matrix(boxes_to_array([]), boxes_to_array([_box(0, 0, 1, 1)])).shape, (0, 1))


class CenterTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(center(_box(0, 0, 10, 10)), (5, 5))
        self.assertEqual(center(_box(10, 20, 4, 6)), (12, 23))
        self.assertEqual(center(_box(0, 0, 1, 1)), (0.5, 0.5))


class TrackTests(SimpleTestCase):

    def test_frames_must_increase(self):
        with self.assertRaises(InvalidBoxError):
            Track(1, 'c001', [(2, _box(0, 0, 1, 1)), (2, _box(0, 0, 1, 1))])

    def test_track_needs_boxes(self):
        with self.assertRaises(InvalidBoxError):
            Track(1, 'c001', [])

    def test_track_set_rejects_duplicate_ids(self):
        track = Track(3, 'c001', [(1, _box(0, 0, 1, 1))])
        with self.assertRaises(InvalidBoxError):
            CameraTrackSet('c001', (track, track))

    def test_from_tracked_boxes_groups_by_id(self):
        boxes = [
            TrackedBox(2, _box(1, 0, 5, 5), 7),
            TrackedBox(1, _box(0, 0, 5, 5), 7),
            TrackedBox(1, _box(50, 0, 5, 5), 2),
        ]
        tracks = CameraTrackSet.from_tracked_boxes('c002', boxes)
        self.assertEqual(tracks.ids(), [2, 7])
        self.assertEqual(tracks.by_id[7].frames, [1, 2])
        self.assertEqual(tracks.frame_span(), (1, 2))
        self.assertEqual([(b.frame, b.track_id) for b in tracks.tracked_boxes()], [(1, 2), (1, 7), (2, 7)])

    def test_detections_from_tracks(self):
        tracks = CameraTrackSet.from_tracked_boxes('c001', [TrackedBox(4, _box(0, 0, 5, 5), 1)])
        self.assertEqual(detections_from_tracks(tracks), {4: [Detection(4, _box(0, 0, 5, 5), 1.0)]})

    def test_group_by_frame_keeps_file_order(self):
        detections = [Detection(2, _box(0, 0, 1, 1)), Detection(1, _box(1, 0, 1, 1)), Detection(2, _box(2, 0, 1, 1))]
        grouped = group_by_frame(detections)
        self.assertEqual(list(grouped), [1, 2])
        self.assertEqual([d.bbox.left for d in grouped[2]], [0, 2])


class ExceptionTests(SimpleTestCase):

    def test_parse_error_names_file_and_line(self):
        self.assertEqual(str(ParseError('dets.txt', 3, 'non-positive box size')),
                         'dets.txt: non-positive box size at line 3')

    def test_missing_embedding_names_track(self):
        self.assertEqual(str(MissingEmbeddingError('c002', 5)), 'no embeddings for camera c002 track 5')
