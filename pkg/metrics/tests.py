import csv
import itertools
import random
import tempfile
import time
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from core.geometry import iou
from core.structures import BoundingBox, CameraTrackSet, Detection, Track
from ingest.writers import write_detections, write_tracks
from synth.generator import SceneSpec, generate_scene

from .detection import average_precision, detection_pr
from .identity import id_metrics, iou_distances, maximum_matching_size, multicamera_id_metrics
from .mapping import mapping_accuracy
from .matching import match_frame
from .report import EvalReport, average_reports, per_camera_rows, render_key_values, write_report_csv

BOX = BoundingBox(0, 0, 40, 40)
FAR = BoundingBox(500, 500, 40, 40)


def straight_track(track_id, first, last, camera='c001', top=0.0):
    return Track(track_id, camera, [(f, BoundingBox(2.0 * f, top, 40, 40)) for f in range(first, last + 1)])


def track_set(*tracks, camera='c001'):
    return CameraTrackSet(camera, tuple(tracks))


def brute_force_idtp(gt: CameraTrackSet, pred: CameraTrackSet, threshold=0.5):
    """Best total correspondence over every one-to-one pairing of trajectories."""
    counts = [
        [
            sum(1 for frame, box in g.boxes
                if frame in dict(p.boxes) and iou(box, dict(p.boxes)[frame]) >= threshold)
            for p in pred
        ]
        for g in gt
    ]
    if not counts or not counts[0]:
        return 0
    n_gt, n_pred = len(counts), len(counts[0])
    if n_gt <= n_pred:
        return max(sum(counts[g][p] for g, p in enumerate(perm)) for perm in itertools.permutations(range(n_pred), n_gt))
    return max(sum(counts[g][p] for p, g in enumerate(perm)) for perm in itertools.permutations(range(n_gt), n_pred))


def random_instance(rng: random.Random):
    anchors = [(rng.uniform(0, 200), rng.uniform(0, 200)) for _ in range(4)]

    def random_track(track_id):
        frames = sorted(rng.sample(range(1, 21), rng.randint(1, 20)))
        x, y = rng.choice(anchors)
        return Track(track_id, 'c001', [
            (f, BoundingBox(x + rng.uniform(-8, 8), y + rng.uniform(-8, 8), 40, 40)) for f in frames
        ])

    gt = track_set(*[random_track(i) for i in range(1, rng.randint(0, 6) + 1)])
    pred = track_set(*[random_track(i) for i in range(1, rng.randint(0, 6) + 1)])
    return gt, pred


class MatchFrameTests(SimpleTestCase):

    def test_single_pair(self):
        self.assertEqual(match_frame([BOX], [(BoundingBox(4, 0, 40, 40), 0.9)]), [(0, 0)])

    def test_higher_confidence_wins(self):
        preds = [(BoundingBox(2, 0, 40, 40), 0.8), (BoundingBox(1, 0, 40, 40), 0.9)]
        self.assertEqual(match_frame([BOX], preds), [(0, 1)])

    def test_gate(self):
        self.assertEqual(match_frame([BoundingBox(0, 0, 10, 10)], [(BoundingBox(5, 0, 10, 10), 1.0)], 0.5), [])

    def test_confidence_ties_follow_input_order(self):
        preds = [(BoundingBox(3, 0, 40, 40), 0.7), (BoundingBox(0, 0, 40, 40), 0.7)]
        self.assertEqual(match_frame([BOX], preds), [(0, 0)])


class AveragePrecisionTests(SimpleTestCase):

    def test_single_match(self):
        self.assertEqual(average_precision({1: [Detection(1, BOX, 0.9)]}, {1: [BOX]}), 1.0)

    def test_no_predictions(self):
        self.assertEqual(average_precision({}, {1: [BOX]}), 0.0)

    def test_false_positive_ranked_first(self):
        preds = {1: [Detection(1, FAR, 0.9), Detection(1, BOX, 0.8)]}
        self.assertAlmostEqual(average_precision(preds, {1: [BOX]}), 0.5, delta=1e-9)

    def test_empty_ground_truth(self):
        self.assertEqual(average_precision({}, {}), 1.0)
        self.assertEqual(average_precision({1: [Detection(1, BOX, 0.5)]}, {}), 0.0)

    def test_invariant_under_monotone_confidence_change(self):
        rng = random.Random(4)
        gt = {f: [BoundingBox(rng.uniform(0, 300), 0, 40, 40) for _ in range(3)] for f in range(1, 6)}
        preds = {
            f: [Detection(f, BoundingBox(b.left + rng.uniform(-15, 15), 0, 40, 40), rng.uniform(0.05, 1.0))
                for b in boxes]
            for f, boxes in gt.items()
        }
        squashed = {f: [Detection(d.frame, d.bbox, d.confidence ** 3) for d in ds] for f, ds in preds.items()}
        self.assertAlmostEqual(average_precision(preds, gt), average_precision(squashed, gt), places=12)


class DetectionPrTests(SimpleTestCase):

    def test_perfect(self):
        counts = detection_pr({1: [BOX]}, {1: [Detection(1, BOX)]})
        self.assertEqual((counts.precision, counts.recall), (1.0, 1.0))

    def test_extra_box(self):
        counts = detection_pr({1: [BOX]}, {1: [Detection(1, BOX), Detection(1, FAR)]})
        self.assertEqual((counts.precision, counts.recall, counts.fp), (0.5, 1.0, 1))

    def test_partial_recall(self):
        gt = {1: [BOX, FAR, BoundingBox(1000, 0, 40, 40)]}
        counts = detection_pr(gt, {1: [Detection(1, BOX), Detection(1, FAR)]})
        self.assertAlmostEqual(counts.recall, 2 / 3)
        self.assertEqual((counts.tp, counts.fn), (2, 1))

    def test_both_empty(self):
        self.assertEqual(detection_pr({}, {}), (1.0, 1.0, 0, 0, 0))


class IdentityMetricTests(SimpleTestCase):

    def test_identical_prediction(self):
        gt = track_set(straight_track(1, 1, 10), straight_track(2, 3, 8, top=200))
        report = id_metrics(gt, gt)
        self.assertEqual((report.idf1, report.idp, report.idr), (1.0, 1.0, 1.0))
        self.assertEqual((report.precision, report.recall), (1.0, 1.0))
        self.assertIsNone(report.ap)

    def test_split_track(self):
        gt = track_set(straight_track(1, 1, 10))
        pred = track_set(straight_track(1, 1, 5), straight_track(2, 6, 10))
        report = id_metrics(gt, pred)
        self.assertEqual((report.idtp, report.idfp, report.idfn), (5, 5, 5))
        self.assertAlmostEqual(report.idf1, 0.5, delta=1e-9)
        self.assertEqual(report.idtp, brute_force_idtp(gt, pred))

    def test_empty_prediction(self):
        report = id_metrics(track_set(straight_track(1, 1, 10)), track_set())
        self.assertEqual((report.idf1, report.idfn), (0.0, 10))

    def test_both_empty(self):
        report = id_metrics(track_set(), track_set())
        self.assertEqual((report.idf1, report.idp, report.idr, report.precision, report.recall), (1.0,) * 5)
        self.assertEqual((report.idtp, report.idfp, report.idfn, report.tp, report.fp, report.fn), (0,) * 6)

    def test_camera_names_are_not_compared(self):
        gt = track_set(straight_track(1, 1, 10))
        pred = track_set(straight_track(1, 1, 10, camera='c001_pred'), camera='c001_pred')
        self.assertEqual(id_metrics(gt, pred).idf1, 1.0)

    def test_relabelling_predictions_changes_nothing(self):
        gt = track_set(straight_track(1, 1, 10), straight_track(2, 1, 10, top=300))
        pred = track_set(straight_track(1, 1, 6), straight_track(2, 7, 10), straight_track(3, 1, 10, top=300))
        relabelled = track_set(*[Track(track.id + 40, 'c001', track.boxes) for track in pred])
        self.assertEqual(id_metrics(gt, pred), id_metrics(gt, relabelled))

    def test_distances_are_nan_below_the_gate(self):
        distances = iou_distances(np.array([[0, 0, 40, 40]]), np.array([[0, 0, 40, 40], [30, 0, 40, 40]]), 0.5)
        self.assertEqual(distances[0, 0], 0.0)
        self.assertTrue(np.isnan(distances[0, 1]))

    def test_frame_matching_is_maximum(self):
        valid = np.array([[True, True], [True, False]])
        self.assertEqual(maximum_matching_size(valid), 2)
        self.assertEqual(maximum_matching_size(np.zeros((3, 0), dtype=bool)), 0)

    def test_matches_brute_force_on_random_instances(self):
        rng = random.Random(2024)
        started = time.perf_counter()
        for i in range(200):
            gt, pred = random_instance(rng)
            report = id_metrics(gt, pred)
            idtp = brute_force_idtp(gt, pred)
            self.assertEqual(report.idtp, idtp, f"instance {i}")
            self.assertEqual(report.idfp, pred.num_boxes() - idtp)
            self.assertEqual(report.idfn, gt.num_boxes() - idtp)
            self.assertLessEqual(report.idtp, report.tp)
            for value in (report.idf1, report.idp, report.idr, report.precision, report.recall):
                self.assertTrue(0.0 <= value <= 1.0)
        self.assertLess(time.perf_counter() - started, 10.0)

    @tag('slow')
    def test_large_sequence(self):
        gt = track_set(*[
            Track(track_id, 'c001', [
                (f, BoundingBox(50.0 * (track_id % 40) + 0.5 * f, 60.0 * (track_id // 40), 40, 40))
                for f in range(1, 2001)
            ])
            for track_id in range(1, 501)
        ])
        started = time.perf_counter()
        report = id_metrics(gt, gt)
        self.assertLess(time.perf_counter() - started, 30.0)
        self.assertEqual(report.idtp, gt.num_boxes())


class MultiCameraMetricTests(SimpleTestCase):

    def test_identical_prediction(self):
        gt = [track_set(straight_track(1, 1, 5), camera='c001'),
              track_set(straight_track(1, 1, 5, camera='c002'), camera='c002')]
        self.assertEqual(multicamera_id_metrics(gt, gt).idf1, 1.0)

    def test_identity_split_across_cameras(self):
        gt = [track_set(straight_track(1, 1, 5), camera='c001'),
              track_set(straight_track(1, 1, 5, camera='c002'), camera='c002')]
        pred = [track_set(straight_track(1, 1, 5), camera='c001'),
                track_set(straight_track(2, 1, 5, camera='c002'), camera='c002')]
        report = multicamera_id_metrics(gt, pred)
        self.assertAlmostEqual(report.idf1, 0.5)
        self.assertEqual((report.precision, report.recall), (1.0, 1.0))


class MappingAccuracyTests(SimpleTestCase):

    def test_identical(self):
        oracle = {('c001', 1): 1, ('c002', 1): 1, ('c002', 2): 2}
        self.assertEqual(mapping_accuracy(oracle, oracle).accuracy, 1.0)

    def test_relabelled(self):
        oracle = {('c001', 1): 1, ('c002', 1): 1, ('c002', 2): 2}
        predicted = {('c001', 1): 9, ('c002', 1): 9, ('c002', 2): 4}
        self.assertEqual(mapping_accuracy(predicted, oracle).accuracy, 1.0)

    def test_everything_merged(self):
        oracle = {(f"c00{i}", 1): i for i in range(1, 5)}
        predicted = {key: 1 for key in oracle}
        self.assertEqual(mapping_accuracy(predicted, oracle).accuracy, 0.25)

    def test_missing_keys_count_as_wrong(self):
        oracle = {('c001', 1): 1, ('c001', 2): 2}
        self.assertEqual(mapping_accuracy({('c001', 1): 1}, oracle).correct, 1)
        self.assertEqual(mapping_accuracy({('c001', 1): 1}, oracle).accuracy, 0.5)


class ReportTests(SimpleTestCase):

    def test_average_of_ratios_and_sum_of_counts(self):
        rows = per_camera_rows({
            'c011': EvalReport(idf1=0.5, idtp=5, idfp=5, idfn=5),
            'c010': EvalReport(idf1=1.0, idtp=10, idfp=0, idfn=0),
        })
        self.assertEqual([label for label, _ in rows], ['c010', 'c011', 'Average'])
        self.assertEqual(rows[-1][1].idf1, 0.75)
        self.assertEqual(rows[-1][1].idtp, 15)
        self.assertIsNone(rows[-1][1].ap)

    def test_key_values(self):
        text = render_key_values(EvalReport(idf1=0.5, idtp=3), prefix='c010.')
        self.assertEqual(text, 'c010.idf1 = 0.5000\nc010.idtp = 3')

    def test_csv_layout(self):
        rows = per_camera_rows({'c010': EvalReport(idf1=1.0, precision=1.0, recall=1.0, idtp=1, idfp=0, idfn=0,
                                                   tp=1, fp=0, fn=0)})
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'report.csv'
            write_report_csv(rows, path)
            with path.open(newline='') as handle:
                table = list(csv.reader(handle))
        self.assertEqual(table[0], ['camera', 'idf1', 'idp', 'idr', 'precision', 'recall', 'ap',
                                    'idtp', 'idfp', 'idfn', 'tp', 'fp', 'fn'])
        self.assertEqual([row[0] for row in table[1:]], ['c010', 'Average'])
        self.assertEqual(table[1][1], '1.0000')
        self.assertEqual(table[1][6], '')

    def test_average_of_nothing(self):
        self.assertEqual(average_reports([]), EvalReport())


class EvalCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_tracks(self, name, tracks):
        path = self.tmp / name
        write_tracks(tracks, path)
        return str(path)

    def evaluate(self, command, *args):
        out = StringIO()
        call_command(command, *args, stdout=out)
        return dict(line.split(' = ') for line in out.getvalue().splitlines())

    def test_prediction_equal_to_ground_truth(self):
        gt = self.write_tracks('gt.txt', track_set(straight_track(1, 1, 10)))
        values = self.evaluate('eval_tracking', '--gt', gt, '--pred', gt)
        self.assertEqual(values['Average.idf1'], '1.0000')

    def test_empty_prediction(self):
        gt = self.write_tracks('gt.txt', track_set(straight_track(1, 1, 10)))
        pred = self.write_tracks('pred.txt', track_set())
        values = self.evaluate('eval_tracking', '--gt', gt, '--pred', pred)
        self.assertEqual(values['gt.idf1'], '0.0000')

    def test_split_track_and_report(self):
        gt = self.write_tracks('gt.txt', track_set(straight_track(1, 1, 10)))
        pred = self.write_tracks('pred.txt', track_set(straight_track(1, 1, 5), straight_track(2, 6, 10)))
        report = self.tmp / 'report.csv'
        values = self.evaluate('eval_tracking', '--gt', gt, '--pred', pred, '--report', str(report))
        self.assertEqual(values['Average.idf1'], '0.5000')
        self.assertTrue(report.read_text().startswith('camera,idf1,idp,idr,precision,recall,ap,'))

    def test_frame_range_mismatch_is_a_warning(self):
        gt = self.write_tracks('gt.txt', track_set(straight_track(1, 1, 10)))
        pred = self.write_tracks('pred.txt', track_set(straight_track(1, 1, 5)))
        with self.assertLogs('metrics.evaluation', level='WARNING') as logs:
            self.evaluate('eval_tracking', '--gt', gt, '--pred', pred)
        self.assertIn('frames 1-10', logs.output[0])

    def test_directories_with_multi_camera_row(self):
        truth = generate_scene(SceneSpec(num_cameras=3, num_identities=5, seed=1))
        for camera, tracks in truth.global_tracks().items():
            write_tracks(tracks, self.tmp / 'gt' / f"{camera}.txt")
            write_tracks(tracks, self.tmp / 'pred' / f"{camera}.txt")
        values = self.evaluate('eval_tracking', '--gt', str(self.tmp / 'gt'), '--pred', str(self.tmp / 'pred'),
                               '--multi-camera')
        self.assertEqual(sorted({key.split('.')[0] for key in values}), ['Average', 'MTMC', 'c001', 'c002', 'c003'])
        self.assertEqual(values['MTMC.idf1'], '1.0000')

    def test_detection_evaluation_of_clean_detections(self):
        truth = generate_scene(SceneSpec(num_cameras=2, num_identities=4, seed=9))
        for camera, tracks in truth.cameras.items():
            write_tracks(tracks, self.tmp / 'gt' / f"{camera}.txt")
            write_detections(truth.detections[camera], self.tmp / 'det' / f"{camera}.txt")
        values = self.evaluate('eval_detection', '--gt', str(self.tmp / 'gt'), '--pred', str(self.tmp / 'det'))
        self.assertEqual(values['Average.ap'], '1.0000')
        self.assertEqual(values['Average.recall'], '1.0000')
        self.assertNotIn('Average.idf1', values)

    def test_mixed_inputs_fail(self):
        gt = self.write_tracks('gt.txt', track_set(straight_track(1, 1, 10)))
        with self.assertRaises(CommandError):
            call_command('eval_tracking', '--gt', gt, '--pred', str(self.tmp), stdout=StringIO())
