"""SORT: Kalman prediction plus optimal one-to-one IoU assignment."""
import logging
from typing import List, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.geometry import boxes_to_array, iou_matrix
from core.structures import CameraTrackSet, Detection, TrackedBox, frame_range
from ingest.config import RunConfig

from .compensation import DisplacementField
from .kalman import KalmanState, box_to_measurement, means_to_ltwh, multi_predict, multi_update

logger = logging.getLogger(__name__)


class KalmanBoxTracker:
    """One live track: filter state plus SORT bookkeeping. The filter itself
    is stepped for all trackers at once by ``SortTracker``."""

    def __init__(self, track_id, detection: Detection, index):
        state = KalmanState.from_box(detection.bbox)
        self.id = track_id
        self.mean = np.array(state.mean)
        self.covariance = np.array(state.covariance)
        self.time_since_update = 0
        self.hit_streak = 1
        self.last_box = detection.bbox
        self.last_index = index

    def predicted(self, mean, covariance):
        self.mean, self.covariance = mean, covariance
        if self.time_since_update > 0:
            self.hit_streak = 0
        self.time_since_update += 1

    def updated(self, mean, covariance, detection: Detection, index):
        self.mean, self.covariance = mean, covariance
        self.time_since_update = 0
        self.hit_streak += 1
        self.last_box = detection.bbox
        self.last_index = index


def associate(track_boxes: np.ndarray, detection_boxes: np.ndarray, threshold):
    """Hungarian assignment maximising total IoU, gated at ``threshold``.

    Returns (matches as (track, detection) pairs, unmatched detections).
    """
    if len(track_boxes) == 0 or len(detection_boxes) == 0:
        return [], list(range(len(detection_boxes)))
    scores = iou_matrix(track_boxes, detection_boxes)
    rows, cols = linear_sum_assignment(-scores)
    matches = [
        (row, col) for row, col in zip(rows.tolist(), cols.tolist())
        if scores[row, col] >= threshold and scores[row, col] > 0
    ]
    matched = {col for _, col in matches}
    unmatched = [col for col in range(len(detection_boxes)) if col not in matched]
    return matches, unmatched


class SortTracker:
    def __init__(self, iou_match_threshold=0.2, max_age=1, min_hits=1,
                 compensation: Optional[DisplacementField] = None):
        self.iou_match_threshold = iou_match_threshold
        self.max_age = max_age
        self.min_hits = min_hits
        self.compensation = compensation or DisplacementField()
        self.trackers: List[KalmanBoxTracker] = []
        self.next_id = 1

    def _predict(self) -> np.ndarray:
        """Advance every tracker one frame; returns the predicted ltwh boxes."""
        if not self.trackers:
            return np.zeros((0, 4))
        means, covariances = multi_predict(
            np.array([t.mean for t in self.trackers]), np.array([t.covariance for t in self.trackers])
        )
        for tracker, mean, covariance in zip(self.trackers, means, covariances):
            tracker.predicted(mean, covariance)
        return means_to_ltwh(means)

    def _gating_boxes(self, predicted: np.ndarray, frame) -> np.ndarray:
        # a track seen in the previous frame is gated with its compensated
        # observation when a displacement is known for it
        if not self.compensation:
            return predicted
        for row, tracker in enumerate(self.trackers):
            if tracker.time_since_update == 1:
                dx, dy = self.compensation.shift(frame - 1, tracker.last_index)
                if dx or dy:
                    predicted[row] = tracker.last_box.translated(dx, dy).as_ltwh()
        return predicted

    def _update(self, matches, detections: Sequence[Detection]):
        if not matches:
            return
        rows = [row for row, _ in matches]
        means, covariances = multi_update(
            np.array([self.trackers[row].mean for row in rows]),
            np.array([self.trackers[row].covariance for row in rows]),
            np.array([box_to_measurement(detections[col].bbox) for _, col in matches]),
        )
        for (row, col), mean, covariance in zip(matches, means, covariances):
            self.trackers[row].updated(mean, covariance, detections[col], col)

    def step(self, frame, detections: Sequence[Detection]) -> List[TrackedBox]:
        """Advance one frame; returns the boxes emitted for this frame."""
        gating = self._gating_boxes(self._predict(), frame)
        matches, unmatched = associate(
            gating, boxes_to_array([d.bbox for d in detections]), self.iou_match_threshold,
        )
        self._update(matches, detections)

        emitted = []
        for row, col in matches:
            tracker = self.trackers[row]
            if tracker.hit_streak >= self.min_hits:
                emitted.append(TrackedBox(frame, detections[col].bbox, tracker.id))

        self.trackers = [t for t in self.trackers if t.time_since_update <= self.max_age]

        for col in unmatched:
            tracker = KalmanBoxTracker(self.next_id, detections[col], col)
            self.next_id += 1
            self.trackers.append(tracker)
            if tracker.hit_streak >= self.min_hits:
                emitted.append(TrackedBox(frame, detections[col].bbox, tracker.id))
        return emitted


def track_sort(frames: Mapping[int, Sequence[Detection]], config: Optional[RunConfig] = None,
               compensation: Optional[DisplacementField] = None, camera='') -> CameraTrackSet:
    config = config or RunConfig()
    tracker = SortTracker(
        config.iou_match_threshold, config.sort_max_age, config.sort_min_hits, compensation
    )
    output = []
    for frame in frame_range(frames):
        output.extend(tracker.step(frame, list(frames.get(frame, ()))))
    tracks = CameraTrackSet.from_tracked_boxes(camera, output)
    logger.info("SORT tracker: %d boxes -> %d tracks", len(output), len(tracks))
    return tracks
