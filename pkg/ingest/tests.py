import random
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from core.exceptions import ConfigError, DimensionMismatchError, ParseError
from core.structures import BoundingBox, CameraTrackSet, Detection, TrackedBox

from .config import RunConfig, load_run_config, read_config_file
from .readers import parse_detections, parse_embeddings, parse_id_mapping, parse_tracks, read_rows
from .tables import EmbeddingTable
from .writers import write_detections, write_embeddings, write_id_mapping, write_tracks


class FileTestCase(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path


def random_track_set(rng, camera='c001', tracks=3):
    boxes = []
    for track_id in range(1, tracks + 1):
        frames = sorted(rng.sample(range(1, 40), rng.randint(1, 12)))
        for frame in frames:
            boxes.append(TrackedBox(frame, BoundingBox(
                rng.uniform(-20, 1800), rng.uniform(0, 1000), rng.uniform(0.5, 300), rng.uniform(0.5, 200)
            ), track_id))
    return CameraTrackSet.from_tracked_boxes(camera, boxes)


class DetectionFileTests(FileTestCase):

    def test_unassigned_row_is_a_detection(self):
        parsed = parse_detections(self.write('c001.txt', '1,-1,10,20,30,40,0.9,-1,-1,-1\n'))
        self.assertEqual(parsed.detections, [Detection(1, BoundingBox(10, 20, 30, 40), 0.9)])
        self.assertEqual(parsed.tracked, [])

    def test_row_with_id_is_a_tracked_box(self):
        parsed = parse_detections(self.write('c001.txt', '1,5,10,20,30,40,1,-1,-1,-1\n'))
        self.assertEqual(parsed.tracked, [TrackedBox(1, BoundingBox(10, 20, 30, 40), 5)])

    def test_negative_size_names_the_line(self):
        path = self.write('c001.txt', '1,-1,10,20,-5,40,0.9,-1,-1,-1\n')
        with self.assertRaisesMessage(ParseError, 'non-positive box size at line 1'):
            parse_detections(path)

    def test_wrong_field_count(self):
        path = self.write('c001.txt', '1,-1,10,20,30,40,0.9,-1,-1,-1\n1,-1,10,20\n')
        with self.assertRaises(ParseError) as caught:
            parse_detections(path)
        self.assertEqual(caught.exception.line, 2)

    def test_non_numeric_field(self):
        path = self.write('c001.txt', '1,-1,ten,20,30,40,0.9,-1,-1,-1\n')
        with self.assertRaisesMessage(ParseError, "non-numeric left 'ten' at line 1"):
            parse_detections(path)

    def test_invalid_utf8_names_the_line(self):
        path = self.tmp / 'c001.txt'
        path.write_bytes(b'1,-1,10,20,30,40,0.9,-1,-1,-1\n\xff\xfe,-1,10,20,30,40,0.9,-1,-1,-1\n')
        with self.assertRaisesMessage(ParseError, 'invalid UTF-8 at line 2'):
            parse_detections(path)

    def test_nul_byte_names_the_line(self):
        path = self.tmp / 'c001.txt'
        path.write_bytes(b'1,-1,10,20,30,40,0.9,-1,-1,-1\n1,-1,10,\x00,30,40,0.9,-1,-1,-1\n')
        with self.assertRaisesMessage(ParseError, 'NUL byte at line 2'):
            parse_detections(path)

    def test_missing_confidence_means_one(self):
        rows = read_rows(self.write('gt.txt', '3,2,1,1,5,5,-1,-1,-1,-1\n4,2,1,1,5,5,,-1,-1,-1\n'))
        self.assertEqual([row.confidence for row in rows], [1.0, 1.0])

    def test_order_is_preserved(self):
        parsed = parse_detections(self.write('c001.txt', '2,-1,1,1,5,5,1,-1,-1,-1\n1,-1,2,2,5,5,1,-1,-1,-1\n'))
        self.assertEqual([d.frame for d in parsed.detections], [2, 1])

    def test_track_file_requires_ids(self):
        path = self.write('c001.txt', '1,3,1,1,5,5,1,-1,-1,-1\n2,-1,1,1,5,5,1,-1,-1,-1\n')
        with self.assertRaisesMessage(ParseError, 'missing track id at line 2'):
            parse_tracks(path)

    def test_track_camera_comes_from_file_name(self):
        tracks = parse_tracks(self.write('c014.txt', '1,3,1,1,5,5,1,-1,-1,-1\n'))
        self.assertEqual(tracks.camera, 'c014')

    def test_detections_round_trip(self):
        frames = {
            1: [Detection(1, BoundingBox(0.1, 0.2, 3.3, 4.4), 0.75)],
            3: [Detection(3, BoundingBox(5, 6, 7, 8), 0.5), Detection(3, BoundingBox(1, 1, 1, 1), 1.0)],
        }
        path = self.tmp / 'dets.txt'
        write_detections(frames, path)
        self.assertEqual(parse_detections(path).detections, frames[1] + frames[3])


class TrackFileTests(FileTestCase):

    def test_empty_track_set_gives_empty_file(self):
        path = self.tmp / 'c001.txt'
        write_tracks(CameraTrackSet('c001'), path)
        self.assertEqual(path.read_text(), '')
        self.assertEqual(len(parse_tracks(path)), 0)

    def test_one_box_is_one_row(self):
        path = self.tmp / 'c001.txt'
        write_tracks(CameraTrackSet.from_tracked_boxes('c001', [TrackedBox(1, BoundingBox(1, 2, 3, 4), 1)]), path)
        self.assertEqual(path.read_text(), '1,1,1.0,2.0,3.0,4.0,1.0,-1,-1,-1\n')

    def test_rows_sorted_by_frame_then_id(self):
        tracks = CameraTrackSet.from_tracked_boxes('c001', [
            TrackedBox(2, BoundingBox(0, 0, 1, 1), 1),
            TrackedBox(1, BoundingBox(0, 0, 1, 1), 9),
            TrackedBox(1, BoundingBox(0, 0, 1, 1), 4),
        ])
        path = self.tmp / 'c001.txt'
        write_tracks(tracks, path)
        keys = [tuple(line.split(',')[:2]) for line in path.read_text().splitlines()]
        self.assertEqual(keys, [('1', '4'), ('1', '9'), ('2', '1')])

    def test_round_trip_of_random_sets(self):
        rng = random.Random(3)
        for i in range(100):
            tracks = random_track_set(rng, tracks=rng.randint(0, 5))
            path = self.tmp / 'c001.txt'
            write_tracks(tracks, path)
            self.assertEqual(parse_tracks(path), tracks, f"instance {i}")


class EmbeddingFileTests(FileTestCase):

    def test_dimension_from_header(self):
        table = parse_embeddings(self.write('emb.csv', 'camera,track,frame,e0,e1,e2,e3\nc001,1,1,1,0,0,0\n'))
        self.assertEqual(table.dimension, 4)
        np.testing.assert_array_equal(table[('c001', 1, 1)], [1, 0, 0, 0])

    def test_inconsistent_width(self):
        path = self.write('emb.csv', 'camera,track,frame,e0,e1\nc001,1,1,1,0\nc001,1,2,1\n')
        with self.assertRaisesMessage(ParseError, 'at line 3'):
            parse_embeddings(path)

    def test_duplicate_key(self):
        path = self.write('emb.csv', 'camera,track,frame,e0\nc001,1,1,1\nc001,1,1,2\n')
        with self.assertRaisesMessage(ParseError, 'duplicate key'):
            parse_embeddings(path)

    def test_invalid_utf8_header(self):
        path = self.tmp / 'emb.csv'
        path.write_bytes(b'camera,track,frame,e\xe9\n')
        with self.assertRaisesMessage(ParseError, 'invalid UTF-8 at line 1'):
            parse_embeddings(path)

    def test_bad_header(self):
        path = self.write('emb.csv', 'camera,track,frame,x0\nc001,1,1,1\n')
        with self.assertRaises(ParseError):
            parse_embeddings(path)

    def test_table_rejects_wrong_dimension(self):
        table = EmbeddingTable(3)
        with self.assertRaises(DimensionMismatchError):
            table.add('c001', 1, 1, [1.0, 2.0])

    def test_vectors_are_not_normalised(self):
        table = parse_embeddings(self.write('emb.csv', 'camera,track,frame,e0,e1\nc001,1,1,3,4\n'))
        np.testing.assert_array_equal(table[('c001', 1, 1)], [3, 4])

    def test_round_trip_of_random_tables(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            table = EmbeddingTable(int(rng.integers(1, 6)))
            for track in range(1, int(rng.integers(1, 4)) + 1):
                for frame in rng.choice(30, size=int(rng.integers(1, 5)), replace=False):
                    table.add(f"c00{int(rng.integers(1, 4))}", track, int(frame) + 1, rng.normal(size=table.dimension))
            path = self.tmp / 'emb.csv'
            write_embeddings(table, path)
            self.assertEqual(parse_embeddings(path), table)

    def test_track_frames(self):
        table = EmbeddingTable(1, {('c001', 2, 9): [1.0], ('c001', 2, 3): [1.0], ('c002', 2, 1): [1.0]})
        self.assertEqual(table.track_frames('c001', 2), [3, 9])
        self.assertEqual(table.track_frames('c001', 5), [])


class IdMappingFileTests(FileTestCase):

    def test_round_trip_of_random_mappings(self):
        rng = random.Random(9)
        for _ in range(100):
            mapping = {
                (f"c{rng.randint(1, 6):03d}", rng.randint(1, 50)): rng.randint(1, 30)
                for _ in range(rng.randint(0, 20))
            }
            path = self.tmp / 'mapping.csv'
            write_id_mapping(mapping, path)
            self.assertEqual(parse_id_mapping(path), mapping)

    def test_rejects_non_positive_ids(self):
        path = self.write('mapping.csv', 'camera,local_id,global_id\nc001,1,0\n')
        with self.assertRaisesMessage(ParseError, 'at line 2'):
            parse_id_mapping(path)


class RunConfigTests(FileTestCase):

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual((config.reid_match_threshold, config.reid_P, config.reid_N), (0.6, 4, 3))
        self.assertEqual((config.min_box_width, config.min_box_height), (80.0, 60.0))
        self.assertEqual(config.parked_dispersion_threshold, 50.0)
        self.assertEqual(config.iou_match_threshold, 0.2)

    def test_file_overrides_defaults(self):
        path = self.write('run.cfg', '# experiment\nreid_P = 6\niou_match_threshold = 0.3  # looser\n')
        config = load_run_config(path)
        self.assertEqual(config.reid_P, 6)
        self.assertEqual(config.iou_match_threshold, 0.3)

    def test_flags_override_file(self):
        path = self.write('run.cfg', 'reid_P = 6\n')
        config = load_run_config(path, {'reid_P': 2, 'reid_N': None})
        self.assertEqual((config.reid_P, config.reid_N), (2, 3))

    @override_settings(TRACKING_DEFAULTS={'sort_max_age': 3})
    def test_environment_defaults_sit_below_the_file(self):
        self.assertEqual(load_run_config().sort_max_age, 3)
        self.assertEqual(load_run_config(self.write('run.cfg', 'sort_max_age = 5\n')).sort_max_age, 5)

    def test_unknown_key_names_the_line(self):
        path = self.write('run.cfg', 'reid_P = 4\nreid_p = 4\n')
        with self.assertRaisesMessage(ConfigError, "unknown key 'reid_p' at line 2"):
            read_config_file(path)

    def test_duplicate_key(self):
        with self.assertRaisesMessage(ConfigError, 'duplicate key'):
            read_config_file(self.write('run.cfg', 'reid_N = 1\nreid_N = 2\n'))

    def test_malformed_line(self):
        with self.assertRaisesMessage(ConfigError, 'at line 1'):
            read_config_file(self.write('run.cfg', 'reid_N 2\n'))

    def test_undecodable_bytes_name_the_line(self):
        path = self.tmp / 'run.cfg'
        path.write_bytes(b'reid_N = 2\nreid_P = \xff\n')
        with self.assertRaisesMessage(ConfigError, 'invalid UTF-8 at line 2'):
            read_config_file(path)
        path.write_bytes(b'reid_N = 2\x00\n')
        with self.assertRaisesMessage(ConfigError, 'NUL byte at line 1'):
            read_config_file(path)

    def test_out_of_range_values(self):
        for values in ({'reid_P': 0}, {'iou_match_threshold': 1.5}, {'eval_iou_threshold': 0.0},
                       {'min_aspect_ratio': 3.0, 'max_aspect_ratio': 1.0}):
            with self.subTest(values=values), self.assertRaises(ConfigError):
                RunConfig().replace(**values)

    def test_non_numeric_value(self):
        with self.assertRaises(ConfigError):
            load_run_config(self.write('run.cfg', 'reid_N = many\n'))
