import tempfile
from collections import Counter
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import SceneSpecError
from core.geometry import iou, iou_matrix
from core.structures import BoundingBox, CameraTrackSet
from ingest.readers import parse_detections, parse_embeddings, parse_id_mapping, parse_tracks

from .generator import SceneSpec, corrupt_detections, embed_tracks, generate_scene, jitter_boxes


def detection_boxes(frames):
    return {frame: sorted(d.bbox.as_ltwh() for d in detections) for frame, detections in frames.items()}


def truth_boxes(tracks: CameraTrackSet):
    return {frame: sorted(b.bbox.as_ltwh() for b in boxes) for frame, boxes in tracks.boxes_by_frame().items()}


class SceneSpecTests(SimpleTestCase):

    def test_defaults_are_valid(self):
        self.assertEqual(SceneSpec().num_cameras, 3)

    def test_invalid_values(self):
        for values in (
            {'num_cameras': 0},
            {'min_speed': 20.0, 'max_speed': 10.0},
            {'dropout_rate': 1.0},
            {'position_noise_sigma': float('nan')},
            {'min_center_distance': 2.5},
            {'seed': -1},
            {'image_width': 100.0},
        ):
            with self.subTest(values=values), self.assertRaises(SceneSpecError):
                SceneSpec(**values)

    def test_too_many_tracks_for_the_frames(self):
        with self.assertRaisesRegex(SceneSpecError, 'frames_per_camera'):
            generate_scene(SceneSpec(num_cameras=2, num_identities=100, frames_per_camera=20))


class GenerateSceneTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.spec = SceneSpec(num_cameras=4, num_identities=12, frames_per_camera=120, seed=11)
        cls.truth = generate_scene(cls.spec)

    def test_same_seed_same_scene(self):
        self.assertEqual(generate_scene(self.spec), self.truth)

    def test_other_seed_other_scene(self):
        other = generate_scene(SceneSpec(num_cameras=4, num_identities=12, frames_per_camera=120, seed=12))
        self.assertNotEqual(other, self.truth)

    def test_oracle_covers_every_track(self):
        keys = {(camera, track.id) for camera, tracks in self.truth.cameras.items() for track in tracks}
        self.assertEqual(set(self.truth.oracle), keys)
        for camera, tracks in self.truth.cameras.items():
            self.assertEqual(tracks.ids(), list(range(1, len(tracks) + 1)))

    def test_every_identity_seen_by_several_cameras(self):
        cameras_per_identity = Counter(self.truth.oracle.values())
        self.assertEqual(set(cameras_per_identity), set(range(1, 13)))
        for identity, count in cameras_per_identity.items():
            self.assertGreaterEqual(count, 2, identity)
            self.assertLessEqual(count, self.spec.max_cameras_per_identity, identity)
        for camera in self.truth.cameras:
            identities = [i for (c, _), i in self.truth.oracle.items() if c == camera]
            self.assertEqual(len(identities), len(set(identities)))

    def test_boxes_stay_in_the_image_and_apart(self):
        for camera, tracks in self.truth.cameras.items():
            for frame, boxes in tracks.boxes_by_frame().items():
                self.assertGreaterEqual(frame, 1)
                self.assertLessEqual(frame, self.spec.frames_per_camera)
                for box in boxes:
                    self.assertGreaterEqual(box.bbox.left, 0.0)
                    self.assertLessEqual(box.bbox.right, self.spec.image_width + 1e-9)
                    self.assertLessEqual(box.bbox.bottom, self.spec.image_height)
                ltwh = np.array([box.bbox.as_ltwh() for box in boxes])
                overlaps = iou_matrix(ltwh, ltwh)
                np.fill_diagonal(overlaps, 0.0)
                self.assertEqual(overlaps.max(), 0.0, f"{camera} frame {frame}")

    def test_speeds_within_bounds(self):
        for tracks in self.truth.cameras.values():
            for track in tracks:
                if len(track) > 1:
                    step = abs(track.boxes[1][1].left - track.boxes[0][1].left)
                    self.assertLessEqual(step, self.spec.max_speed + 1e-9)

    def test_cluster_centers_are_apart(self):
        centers = self.truth.centers
        np.testing.assert_allclose(np.linalg.norm(centers, axis=1), 1.0)
        distances = 1.0 - centers @ centers.T
        off_diagonal = distances[~np.eye(len(centers), dtype=bool)]
        self.assertGreaterEqual(off_diagonal.min(), self.spec.min_center_distance - 1e-12)

    def test_every_box_has_an_embedding_near_its_identity(self):
        self.assertEqual(len(self.truth.embeddings), self.truth.num_boxes())
        for camera, tracks in self.truth.cameras.items():
            for track in tracks:
                center = self.truth.centers[self.truth.oracle[(camera, track.id)] - 1]
                for frame in track.frames:
                    vector = self.truth.embeddings[(camera, track.id, frame)]
                    self.assertLess(np.linalg.norm(vector - center), 0.8)

    def test_clean_detections_equal_ground_truth(self):
        for camera, tracks in self.truth.cameras.items():
            self.assertEqual(detection_boxes(self.truth.detections[camera]), truth_boxes(tracks))
            for detections in self.truth.detections[camera].values():
                for detection in detections:
                    self.assertTrue(0.5 <= detection.confidence <= 1.0)

    def test_collapsed_clusters(self):
        truth = generate_scene(SceneSpec(num_identities=5, seed=3, collapse_clusters=True))
        self.assertTrue(np.all(truth.centers == truth.centers[0]))

    def test_infeasible_separation(self):
        with self.assertRaisesRegex(SceneSpecError, 'embedding_dim'):
            generate_scene(SceneSpec(num_identities=3, embedding_dim=1))


class CorruptDetectionsTests(SimpleTestCase):

    def test_dropout_rate_over_many_boxes(self):
        truth = generate_scene(SceneSpec(num_cameras=5, num_identities=40, frames_per_camera=600,
                                         embedding_dim=64, seed=5))
        total = truth.num_boxes()
        self.assertGreaterEqual(total, 10000)
        detections = corrupt_detections(truth, 0.1, 0.0, seed=8)
        kept = sum(len(ds) for frames in detections.values() for ds in frames.values())
        self.assertTrue(0.08 <= (total - kept) / total <= 0.12, total - kept)

    def test_same_seed_same_detections(self):
        truth = generate_scene(SceneSpec(seed=2))
        self.assertEqual(corrupt_detections(truth, 0.3, 2.0, seed=4), corrupt_detections(truth, 0.3, 2.0, seed=4))

    def test_dropping_everything(self):
        truth = generate_scene(SceneSpec(seed=2))
        self.assertEqual(corrupt_detections(truth, 1.0, 0.0, seed=1), {camera: {} for camera in truth.cameras})

    def test_scene_dropout_and_noise(self):
        truth = generate_scene(SceneSpec(seed=6, dropout_rate=0.2, position_noise_sigma=3.0))
        kept = sum(len(ds) for frames in truth.detections.values() for ds in frames.values())
        self.assertLess(kept, truth.num_boxes())
        for camera, frames in truth.detections.items():
            truth_frames = truth_boxes(truth.cameras[camera])
            for frame, detections in frames.items():
                self.assertIn(frame, truth_frames)
                self.assertLessEqual(len(detections), len(truth_frames[frame]))

    def test_invalid_arguments(self):
        truth = generate_scene(SceneSpec(seed=2))
        with self.assertRaises(SceneSpecError):
            corrupt_detections(truth, 1.5, 0.0, seed=1)
        with self.assertRaises(SceneSpecError):
            corrupt_detections(truth, 0.1, -1.0, seed=1)

    def test_jitter_keeps_boxes_close(self):
        rng = np.random.Generator(np.random.PCG64(7))
        boxes = np.tile([100.0, 100.0, 40.0, 40.0], (5000, 1))
        moved = jitter_boxes(boxes, 2.0, rng)
        np.testing.assert_array_equal(moved[:, 2:], boxes[:, 2:])
        original = BoundingBox(100.0, 100.0, 40.0, 40.0)
        close = sum(iou(original, BoundingBox(*row)) >= 0.7 for row in moved.tolist())
        self.assertGreater(close / len(moved), 0.99)

    def test_zero_jitter(self):
        boxes = np.array([[1.0, 2.0, 3.0, 4.0]])
        np.testing.assert_array_equal(jitter_boxes(boxes, 0.0, np.random.Generator(np.random.PCG64(0))), boxes)


class EmbedTracksTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.truth = generate_scene(SceneSpec(num_cameras=2, num_identities=4, seed=13))

    def test_tracks_on_ground_truth_take_their_cluster(self):
        table = embed_tracks(self.truth, list(self.truth.cameras.values()))
        self.assertEqual(len(table), self.truth.num_boxes())
        for (camera, track, frame), vector in table.entries.items():
            center = self.truth.centers[self.truth.oracle[(camera, track)] - 1]
            self.assertLess(np.linalg.norm(vector - center), 0.8)

    def test_is_deterministic(self):
        tracks = list(self.truth.cameras.values())
        self.assertEqual(embed_tracks(self.truth, tracks), embed_tracks(self.truth, tracks))

    def test_unknown_camera(self):
        with self.assertRaises(SceneSpecError):
            embed_tracks(self.truth, [CameraTrackSet('c999')])


class SynthCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_writes_scene_files(self):
        out = StringIO()
        call_command('synth', '--output-dir', str(self.tmp), '--seed', '3', '--cameras', '2',
                     '--identities', '4', '--dropout', '0.1', stdout=out)
        truth = generate_scene(SceneSpec(num_cameras=2, num_identities=4, seed=3, dropout_rate=0.1))
        self.assertIn('2 cameras, 4 identities', out.getvalue())
        for camera, tracks in truth.cameras.items():
            self.assertEqual(parse_tracks(self.tmp / 'gt' / f"{camera}.txt"), tracks)
            self.assertEqual(parse_tracks(self.tmp / 'gt_global' / f"{camera}.txt"),
                             truth.global_tracks()[camera])
            rows = parse_detections(self.tmp / 'detections' / f"{camera}.txt").detections
            self.assertEqual(len(rows), sum(len(ds) for ds in truth.detections[camera].values()))
        self.assertEqual(parse_embeddings(self.tmp / 'embeddings.csv'), truth.embeddings)
        self.assertEqual(parse_id_mapping(self.tmp / 'oracle_mapping.csv'), truth.oracle)

    def test_embeds_track_files(self):
        call_command('synth', '--output-dir', str(self.tmp), '--seed', '3', stdout=StringIO())
        out = StringIO()
        call_command('synth', '--output-dir', str(self.tmp), '--seed', '3',
                     '--embed-tracks', str(self.tmp / 'gt'), stdout=out)
        table = parse_embeddings(self.tmp / 'embeddings_tracks.csv')
        self.assertEqual(len(table), generate_scene(SceneSpec(seed=3)).num_boxes())
        self.assertIn('3 track files', out.getvalue())

    def test_invalid_scene(self):
        with self.assertRaisesRegex(CommandError, 'min_speed'):
            call_command('synth', '--output-dir', str(self.tmp), '--min-speed', '20', '--max-speed', '10',
                         stdout=StringIO())
