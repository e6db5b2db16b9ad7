from functools import partial

from core.commands import PipelineCommand
from core.structures import frame_range, group_by_frame
from ingest.readers import parse_detections
from metrics.detection import average_precision, detection_pr
from metrics.evaluation import evaluate_cameras, pair_inputs, warn_on_frame_mismatch
from metrics.report import EvalReport, per_camera_rows, render_rows, write_report_csv


def _span(frames):
    span = frame_range(frames)
    return (span.start, span.stop - 1) if span else None


def evaluate_detection(inputs, iou_threshold):
    gt = {
        frame: [d.bbox for d in detections]
        for frame, detections in group_by_frame(parse_detections(inputs.gt).detections).items()
    }
    preds = group_by_frame(parse_detections(inputs.pred).detections) if inputs.pred else {}
    warn_on_frame_mismatch(inputs.camera, _span(gt), _span(preds))
    counts = detection_pr(gt, preds, iou_threshold)
    return EvalReport(
        precision=counts.precision, recall=counts.recall,
        ap=average_precision(preds, gt, iou_threshold),
        tp=counts.tp, fp=counts.fp, fn=counts.fn,
    )


class Command(PipelineCommand):
    help = 'Average precision, precision and recall of detections per camera'
    config_flags = ('eval_iou_threshold',)

    def add_command_arguments(self, parser):
        parser.add_argument('--gt', required=True, help='ground-truth file or directory')
        parser.add_argument('--pred', required=True, help='detection file or directory')
        parser.add_argument('--report', help='CSV report to write')

    def run(self, **options):
        config = self.run_config(options)
        pairs = pair_inputs(options['gt'], options['pred'])
        reports = evaluate_cameras(pairs, partial(evaluate_detection, iou_threshold=config.eval_iou_threshold))
        rows = per_camera_rows(reports)
        self.stdout.write(render_rows(rows))
        if options['report']:
            write_report_csv(rows, options['report'])
