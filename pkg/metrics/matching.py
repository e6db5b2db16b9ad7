from typing import List, Sequence, Tuple

import numpy as np

from core.geometry import boxes_to_array, iou_matrix
from core.structures import BoundingBox


def confidence_order(confidences) -> np.ndarray:
    """Indices by descending confidence; ties keep input order."""
    return np.argsort(-np.asarray(confidences, dtype=float), kind='stable')


def match_arrays(gt: np.ndarray, pred: np.ndarray, confidences, iou_threshold) -> List[Tuple[int, int]]:
    """``match_frame`` on (n, 4) ltwh arrays."""
    if len(gt) == 0 or len(pred) == 0:
        return []
    scores = iou_matrix(pred, gt)
    taken = np.zeros(len(gt), dtype=bool)
    pairs = []
    for p in confidence_order(confidences):
        candidates = np.where(taken, -1.0, scores[p])
        g = int(np.argmax(candidates))
        if candidates[g] >= iou_threshold and candidates[g] > 0:
            taken[g] = True
            pairs.append((g, int(p)))
    return pairs


def match_frame(gt: Sequence[BoundingBox], pred: Sequence[Tuple[BoundingBox, float]],
                iou_threshold=0.5) -> List[Tuple[int, int]]:
    """Greedy one-to-one matching of one frame.

    Predictions go by descending confidence; each takes the still unmatched
    ground-truth box it overlaps most, if that IoU reaches the threshold.
    Returns (gt_index, pred_index) pairs.
    """
    return match_arrays(
        boxes_to_array(gt),
        boxes_to_array([box for box, _ in pred]),
        [confidence for _, confidence in pred],
        iou_threshold,
    )
