"""Identity metrics (IDF1, IDP, IDR).

Observations are fed frame by frame into a ``motmetrics`` accumulator and
the identity family is read from its global trajectory assignment: each
ground-truth trajectory is paired with at most one predicted trajectory so
that the number of corresponding observations (IoU at or above the gate)
is maximal. For several cameras a frame is one (camera, frame) pair.
"""
import logging
import math
from typing import Dict, Sequence, Tuple

import motmetrics as mm
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from core.geometry import iou_matrix
from core.structures import CameraTrackSet

from .report import EvalReport, identity_scores

logger = logging.getLogger(__name__)

IDENTITY_METRICS = ['idf1', 'idp', 'idr', 'idtp', 'idfp', 'idfn']

_metrics_host = mm.metrics.create()


class _Observations:
    """All boxes of a group of track sets keyed by (camera, frame)."""

    def __init__(self, track_sets: Sequence[CameraTrackSet], by_camera=True):
        self.total = 0
        self.groups: Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]] = {}

        per_key = {}
        for tracks in track_sets:
            camera = tracks.camera if by_camera else ''
            for track in tracks:
                self.total += len(track)
                boxes = track.ltwh
                for row, frame in enumerate(track.frames):
                    per_key.setdefault((camera, frame), []).append((track.id, boxes[row]))
        for key, items in per_key.items():
            ids = np.array([track_id for track_id, _ in items], dtype=np.int64)
            ltwh = np.array([box for _, box in items], dtype=float).reshape(-1, 4)
            self.groups[key] = (ids, ltwh)


def iou_distances(gt_boxes, pred_boxes, iou_threshold) -> np.ndarray:
    """1 - IoU, NaN where the pair is below the gate."""
    overlap = iou_matrix(gt_boxes, pred_boxes)
    distances = 1.0 - overlap
    distances[~(overlap >= iou_threshold)] = np.nan
    return distances


def maximum_matching_size(valid: np.ndarray) -> int:
    """Size of a maximum one-to-one matching over the True entries."""
    if not valid.any():
        return 0
    matches = maximum_bipartite_matching(csr_matrix(valid), perm_type='column')
    return int((matches >= 0).sum())


def accumulate(gt: _Observations, pred: _Observations, iou_threshold):
    """Accumulator over every frame either side observes, and the summed
    per-frame TP of a maximum matching. TP is never below IDTP."""
    accumulator = mm.MOTAccumulator(auto_id=False)
    empty = np.zeros(0, dtype=np.int64)
    no_boxes = np.zeros((0, 4))
    tp = 0
    for frame_id, key in enumerate(sorted(set(gt.groups) | set(pred.groups))):
        gt_ids, gt_boxes = gt.groups.get(key, (empty, no_boxes))
        pred_ids, pred_boxes = pred.groups.get(key, (empty, no_boxes))
        distances = iou_distances(gt_boxes, pred_boxes, iou_threshold)
        accumulator.update(gt_ids, pred_ids, distances, frameid=frame_id)
        tp += maximum_matching_size(np.isfinite(distances))
    return accumulator, tp


def _ratio(value, fallback):
    value = float(value)
    return fallback if math.isnan(value) else value


def _evaluate(gt_sets, pred_sets, iou_threshold, by_camera=True) -> EvalReport:
    gt = _Observations(gt_sets, by_camera)
    pred = _Observations(pred_sets, by_camera)
    if gt.total == 0 and pred.total == 0:
        return EvalReport(idf1=1.0, idp=1.0, idr=1.0, precision=1.0, recall=1.0,
                          idtp=0, idfp=0, idfn=0, tp=0, fp=0, fn=0)

    accumulator, tp = accumulate(gt, pred, iou_threshold)
    summary = _metrics_host.compute(accumulator, metrics=IDENTITY_METRICS, name='run').loc['run']
    idtp, idfp, idfn = (int(round(float(summary[name]))) for name in ('idtp', 'idfp', 'idfn'))
    fallback_f1, fallback_p, fallback_r = identity_scores(idtp, idfp, idfn)

    fp = pred.total - tp
    fn = gt.total - tp
    precision = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
    return EvalReport(
        idf1=_ratio(summary['idf1'], fallback_f1),
        idp=_ratio(summary['idp'], fallback_p),
        idr=_ratio(summary['idr'], fallback_r),
        precision=precision, recall=recall,
        idtp=idtp, idfp=idfp, idfn=idfn, tp=tp, fp=fp, fn=fn,
    )


def id_metrics(gt: CameraTrackSet, pred: CameraTrackSet, iou_threshold=0.5) -> EvalReport:
    """IDF1 family for one camera; ``ap`` is left unset.

    Camera names are not compared, so gt and pred files may be named apart.
    """
    report = _evaluate([gt], [pred], iou_threshold, by_camera=False)
    logger.debug("Camera %s: %s", gt.camera, report)
    return report


def multicamera_id_metrics(gt: Sequence[CameraTrackSet], pred: Sequence[CameraTrackSet],
                           iou_threshold=0.5) -> EvalReport:
    """IDF1 family over all cameras; track ids must be global identities."""
    return _evaluate(list(gt), list(pred), iou_threshold)
