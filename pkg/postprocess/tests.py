import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.test import SimpleTestCase

from core.structures import BoundingBox, CameraTrackSet, Track
from ingest.readers import parse_tracks
from ingest.writers import write_tracks

from .filters import center_dispersion, filter_small, remove_parked


def track(track_id, boxes, camera='c001'):
    return Track(track_id, camera, [(frame, box) for frame, box in enumerate(boxes, start=1)])


def moving(track_id, frames=20, step=10.0, width=100.0, height=80.0):
    return track(track_id, [BoundingBox(step * i, 0, width, height) for i in range(frames)])


def parked(track_id, frames=20, width=100.0, height=80.0):
    return track(track_id, [BoundingBox(300, 300, width, height)] * frames)


class DispersionTests(SimpleTestCase):

    def test_moving_track_dispersion(self):
        expected = sum((10 * i - 95) ** 2 for i in range(20)) / 20
        self.assertEqual(expected, 3325)
        self.assertAlmostEqual(center_dispersion(moving(1)), 3325, places=9)

    def test_static_track_has_zero_dispersion(self):
        self.assertEqual(center_dispersion(parked(1)), 0.0)

    def test_single_box_has_zero_dispersion(self):
        self.assertEqual(center_dispersion(parked(1, frames=1)), 0.0)


class RemoveParkedTests(SimpleTestCase):

    def test_static_tracks_are_removed(self):
        tracks = CameraTrackSet('c001', (parked(1), moving(2), parked(3, frames=1)))
        result = remove_parked(tracks, 50.0)
        self.assertEqual(result.tracks.ids(), [2])
        self.assertEqual({stat.track_id: stat.dispersion for stat in result.stats}[1], 0.0)

    def test_zero_threshold_removes_only_static_tracks(self):
        wobble = track(4, [BoundingBox(0, 0, 10, 10), BoundingBox(0.5, 0, 10, 10)])
        tracks = CameraTrackSet('c001', (parked(1), moving(2), wobble))
        self.assertEqual(remove_parked(tracks, 0.0).tracks.ids(), [2, 4])

    def test_slow_track_below_threshold(self):
        tracks = CameraTrackSet('c001', (moving(1, frames=5, step=1.0),))
        self.assertEqual(len(remove_parked(tracks, 50.0).tracks), 0)

    def test_empty_set(self):
        self.assertEqual(len(remove_parked(CameraTrackSet('c001')).tracks), 0)

    def test_every_dispersion_is_logged(self):
        tracks = CameraTrackSet('c001', (parked(1), moving(2)))
        with self.assertLogs('postprocess.filters', level='DEBUG') as logs:
            remove_parked(tracks)
        self.assertIn('track 1 center dispersion 0.00 px^2', logs.output[0])
        self.assertIn('track 2 center dispersion', logs.output[1])
        self.assertIn('removed 1 parked tracks', logs.output[2])

    def test_idempotent(self):
        tracks = CameraTrackSet('c001', (parked(1), moving(2), moving(3, step=0.5)))
        once = remove_parked(tracks).tracks
        self.assertEqual(remove_parked(once).tracks, once)


class FilterSmallTests(SimpleTestCase):

    def test_bounds_are_inclusive(self):
        boxes = [BoundingBox(0, 0, 80, 60), BoundingBox(0, 0, 79, 60), BoundingBox(0, 0, 80, 59), BoundingBox(0, 0, 79, 100)]
        result = filter_small(CameraTrackSet('c001', (track(1, boxes),)))
        self.assertEqual(result.by_id[1].boxes, ((1, BoundingBox(0, 0, 80, 60)),))

    def test_track_of_small_boxes_is_removed(self):
        tracks = CameraTrackSet('c001', (track(1, [BoundingBox(0, 0, 10, 10)] * 3), moving(2)))
        self.assertEqual(filter_small(tracks).ids(), [2])

    def test_output_is_a_subset_and_idempotent(self):
        boxes = [BoundingBox(i, 0, 70 + 5 * i, 55 + 5 * i) for i in range(6)]
        tracks = CameraTrackSet('c001', (track(1, boxes), moving(2)))
        once = filter_small(tracks)
        kept = {(t.id, frame, box) for t in once for frame, box in t.boxes}
        everything = {(t.id, frame, box) for t in tracks for frame, box in t.boxes}
        self.assertTrue(kept <= everything)
        self.assertEqual(filter_small(once), once)


class PostprocessCommandTests(SimpleTestCase):

    def test_parked_then_small(self):
        tracks = CameraTrackSet('c001', (
            parked(1),
            moving(2),
            moving(3, width=60.0),
        ))
        with tempfile.TemporaryDirectory() as tmp:
            source, target = Path(tmp) / 'c001.txt', Path(tmp) / 'clean' / 'c001.txt'
            write_tracks(tracks, source)
            out = StringIO()
            call_command('postprocess', '--tracks', str(source), '--output', str(target), stdout=out)
            self.assertEqual(parse_tracks(target).ids(), [2])
            self.assertIn('kept 1 of 3 tracks (1 parked)', out.getvalue())
            self.assertIn('parked track 1: dispersion 0.00 px^2', out.getvalue())
            self.assertNotIn('parked track 2', out.getvalue())

    def test_flags_override_thresholds(self):
        tracks = CameraTrackSet('c001', (moving(1, width=60.0),))
        with tempfile.TemporaryDirectory() as tmp:
            source, target = Path(tmp) / 'c001.txt', Path(tmp) / 'out.txt'
            write_tracks(tracks, source)
            call_command('postprocess', '--tracks', str(source), '--output', str(target),
                         '--min-box-width', '50', stdout=StringIO())
            self.assertEqual(len(parse_tracks(target, 'c001')), 1)
