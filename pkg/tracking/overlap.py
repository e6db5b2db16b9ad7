"""Maximum-overlap tracker.

Each box of frame ``f`` inherits the id of the box of frame ``f - 1`` it
overlaps most. A frame with no detection for an object breaks its track.
"""
import logging
from typing import Mapping, Optional, Sequence

import numpy as np

from core.geometry import boxes_to_array, iou_matrix
from core.structures import CameraTrackSet, Detection, TrackedBox, frame_range

from .compensation import DisplacementField, apply_compensation

logger = logging.getLogger(__name__)


def greedy_match(scores: np.ndarray, previous_ids: Sequence[int], threshold):
    """Greedy one-to-one matching by descending score.

    ``scores`` is (previous, current). Equal scores go to the lower previous
    id first, then to the earlier current box. Returns {current: previous}.
    """
    if scores.size == 0:
        return {}
    rows, cols = np.nonzero((scores >= threshold) & (scores > 0))
    order = sorted(
        zip(rows.tolist(), cols.tolist()),
        key=lambda rc: (-scores[rc[0], rc[1]], previous_ids[rc[0]], rc[1]),
    )
    used_rows = set()
    matches = {}
    for row, col in order:
        if row in used_rows or col in matches:
            continue
        used_rows.add(row)
        matches[col] = row
    return matches


def track_overlap(frames: Mapping[int, Sequence[Detection]], iou_match_threshold=0.2,
                  compensation: Optional[DisplacementField] = None, camera='') -> CameraTrackSet:
    compensation = compensation or DisplacementField()
    next_id = 1
    output = []
    previous_boxes = []
    previous_ids = []

    for frame in frame_range(frames):
        detections = list(frames.get(frame, ()))
        current_boxes = [d.bbox for d in detections]

        if previous_boxes and current_boxes:
            shifted = apply_compensation(previous_boxes, compensation, frame - 1)
            scores = iou_matrix(boxes_to_array(shifted), boxes_to_array(current_boxes))
            matches = greedy_match(scores, previous_ids, iou_match_threshold)
        else:
            matches = {}

        current_ids = []
        for index, box in enumerate(current_boxes):
            if index in matches:
                track_id = previous_ids[matches[index]]
            else:
                track_id = next_id
                next_id += 1
            current_ids.append(track_id)
            output.append(TrackedBox(frame, box, track_id))

        previous_boxes, previous_ids = current_boxes, current_ids

    tracks = CameraTrackSet.from_tracked_boxes(camera, output)
    logger.info("Overlap tracker: %d detections -> %d tracks", len(output), len(tracks))
    return tracks
