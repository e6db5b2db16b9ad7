"""Detection metrics: AP with all-point interpolation, precision and recall."""
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from core.geometry import boxes_to_array
from core.structures import BoundingBox, Detection

from .matching import confidence_order, match_arrays


class DetectionCounts(NamedTuple):
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


def _label_predictions(preds: Mapping[int, Sequence[Detection]],
                       gt: Mapping[int, Sequence[BoundingBox]], iou_threshold):
    """Confidence and TP flag of every prediction, in frame then file order."""
    confidences = []
    hits = []
    for frame in sorted(preds):
        detections = preds[frame]
        flags = np.zeros(len(detections), dtype=bool)
        pairs = match_arrays(
            boxes_to_array(gt.get(frame, ())),
            boxes_to_array([d.bbox for d in detections]),
            [d.confidence for d in detections],
            iou_threshold,
        )
        for _, p in pairs:
            flags[p] = True
        confidences.extend(d.confidence for d in detections)
        hits.extend(flags.tolist())
    return np.array(confidences, dtype=float), np.array(hits, dtype=bool)


def average_precision(preds: Mapping[int, Sequence[Detection]],
                      gt: Mapping[int, Sequence[BoundingBox]], iou_threshold=0.5) -> float:
    """Area under the precision/recall curve, precision made non-increasing
    from the right (all-point interpolation)."""
    num_gt = sum(len(boxes) for boxes in gt.values())
    num_pred = sum(len(detections) for detections in preds.values())
    if num_gt == 0:
        return 1.0 if num_pred == 0 else 0.0
    if num_pred == 0:
        return 0.0

    confidences, hits = _label_predictions(preds, gt, iou_threshold)
    hits = hits[confidence_order(confidences)]
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / num_gt
    precision = tp / (tp + fp)

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def detection_pr(gt: Mapping[int, Sequence[BoundingBox]], pred: Mapping[int, Sequence[Detection]],
                 iou_threshold=0.5) -> DetectionCounts:
    """Per-frame greedy matching. Empty vs empty scores 1/1; a zero
    denominator otherwise scores 0."""
    num_gt = sum(len(boxes) for boxes in gt.values())
    num_pred = sum(len(detections) for detections in pred.values())
    if num_gt == 0 and num_pred == 0:
        return DetectionCounts(1.0, 1.0, 0, 0, 0)
    _, hits = _label_predictions(pred, gt, iou_threshold)
    tp = int(hits.sum())
    fp = num_pred - tp
    fn = num_gt - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return DetectionCounts(precision, recall, tp, fp, fn)
