"""Track clean-up matching the annotation policy: parked cars and small
boxes are not annotated, so they are removed from tracker output.

Run ``remove_parked`` before ``filter_small`` so the dispersion sees every
observed box.
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from core.geometry import centers
from core.structures import CameraTrackSet, Track

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DispersionStat:
    track_id: int
    dispersion: float


class ParkedResult(NamedTuple):
    tracks: CameraTrackSet
    stats: List[DispersionStat]


def center_dispersion(track: Track) -> float:
    """Mean squared distance (px^2) of the box centers to their centroid."""
    points = centers(track.ltwh)
    if not np.ptp(points, axis=0).any():
        return 0.0
    deviations = points - points.mean(axis=0)
    return float(np.mean(np.sum(deviations ** 2, axis=1)))


def remove_parked(tracks: CameraTrackSet, threshold=50.0) -> ParkedResult:
    """Drop tracks whose center dispersion is below ``threshold``.

    Static tracks (dispersion 0, including single-box tracks) are dropped
    for any threshold.
    """
    stats = [DispersionStat(track.id, center_dispersion(track)) for track in tracks]
    kept = [track for track, stat in zip(tracks, stats) if stat.dispersion >= threshold and stat.dispersion > 0]
    for stat in stats:
        logger.debug("Camera %s: track %d center dispersion %.2f px^2", tracks.camera, stat.track_id, stat.dispersion)
    removed = len(tracks) - len(kept)
    if removed:
        logger.info("Camera %s: removed %d parked tracks", tracks.camera, removed)
    return ParkedResult(tracks.replace_tracks(kept), stats)


def filter_small(tracks: CameraTrackSet, min_w=80.0, min_h=60.0) -> CameraTrackSet:
    """Drop boxes narrower than ``min_w`` or lower than ``min_h`` (bounds inclusive)."""
    kept = []
    dropped = 0
    for track in tracks:
        boxes = [(frame, bbox) for frame, bbox in track.boxes
                 if bbox.width >= min_w and bbox.height >= min_h]
        dropped += len(track) - len(boxes)
        if len(boxes) == len(track):
            kept.append(track)
        elif boxes:
            kept.append(Track(track.id, track.camera, tuple(boxes)))
    if dropped:
        logger.info("Camera %s: dropped %d small boxes", tracks.camera, dropped)
    return tracks.replace_tracks(kept)
