import numpy as np

from .structures import BoundingBox


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; touching edges give 0."""
    inter_w = min(a.right, b.right) - max(a.left, b.left)
    inter_h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    if a == b:
        return 1.0
    inter = inter_w * inter_h
    return inter / (a.area + b.area - inter)


def center(b: BoundingBox):
    return (b.left + b.width / 2.0, b.top + b.height / 2.0)


def boxes_to_array(boxes) -> np.ndarray:
    """(n, 4) ltwh array from an iterable of BoundingBox."""
    array = np.array([box.as_ltwh() for box in boxes], dtype=float)
    return array.reshape(-1, 4)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (n, 4) and (m, 4) ltwh arrays."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    a_right = a[:, 0] + a[:, 2]
    a_bottom = a[:, 1] + a[:, 3]
    b_right = b[:, 0] + b[:, 2]
    b_bottom = b[:, 1] + b[:, 3]
    inter_w = np.minimum(a_right[:, None], b_right[None, :]) - np.maximum(a[:, 0][:, None], b[:, 0][None, :])
    inter_h = np.minimum(a_bottom[:, None], b_bottom[None, :]) - np.maximum(a[:, 1][:, None], b[:, 1][None, :])
    inter = np.clip(inter_w, 0.0, None) * np.clip(inter_h, 0.0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return inter / union


def centers(ltwh: np.ndarray) -> np.ndarray:
    """(n, 2) box centers from an (n, 4) ltwh array."""
    ltwh = np.asarray(ltwh, dtype=float).reshape(-1, 4)
    return ltwh[:, :2] + ltwh[:, 2:] / 2.0
