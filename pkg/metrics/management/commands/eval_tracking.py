from functools import partial

from core.commands import PipelineCommand
from core.structures import CameraTrackSet
from ingest.readers import parse_tracks
from metrics.evaluation import evaluate_cameras, pair_inputs, warn_on_frame_mismatch
from metrics.identity import id_metrics, multicamera_id_metrics
from metrics.report import per_camera_rows, render_rows, write_report_csv

MULTI_CAMERA_ROW = 'MTMC'


def load_pair(inputs):
    gt = parse_tracks(inputs.gt, inputs.camera)
    pred = parse_tracks(inputs.pred, inputs.camera) if inputs.pred else CameraTrackSet(inputs.camera)
    warn_on_frame_mismatch(inputs.camera, gt.frame_span(), pred.frame_span())
    return gt, pred


def evaluate_tracking(inputs, iou_threshold):
    gt, pred = load_pair(inputs)
    return gt, pred, id_metrics(gt, pred, iou_threshold)


class Command(PipelineCommand):
    help = 'IDF1, IDP, IDR, precision and recall of tracks per camera'
    config_flags = ('eval_iou_threshold',)

    def add_command_arguments(self, parser):
        parser.add_argument('--gt', required=True, help='ground-truth track file or directory')
        parser.add_argument('--pred', required=True, help='track file or directory')
        parser.add_argument('--report', help='CSV report to write')
        parser.add_argument('--multi-camera', action='store_true',
                            help='also score all cameras together; ids must be global')

    def run(self, **options):
        config = self.run_config(options)
        pairs = pair_inputs(options['gt'], options['pred'])
        results = evaluate_cameras(pairs, partial(evaluate_tracking, iou_threshold=config.eval_iou_threshold))
        rows = per_camera_rows({camera: report for camera, (_, _, report) in results.items()})
        if options['multi_camera']:
            ordered = [results[camera] for camera in sorted(results)]
            rows.append((MULTI_CAMERA_ROW, multicamera_id_metrics(
                [gt for gt, _, _ in ordered], [pred for _, pred, _ in ordered], config.eval_iou_threshold
            )))
        self.stdout.write(render_rows(rows))
        if options['report']:
            write_report_csv(rows, options['report'])
