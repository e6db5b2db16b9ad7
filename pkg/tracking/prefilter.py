import logging
from typing import Dict, List, Mapping, NamedTuple, Sequence

from core.structures import Detection

logger = logging.getLogger(__name__)


class FilteredFrames(NamedTuple):
    frames: Dict[int, List[Detection]]
    # frame -> original indices of the surviving detections
    kept: Dict[int, List[int]]


def filter_detections(frames: Mapping[int, Sequence[Detection]], min_confidence=0.0,
                      min_aspect_ratio=0.0, max_aspect_ratio=0.0) -> FilteredFrames:
    """Drop low-confidence detections and, when enabled, boxes whose
    width/height falls outside [min_aspect_ratio, max_aspect_ratio].

    The aspect check is disabled while ``max_aspect_ratio`` is 0.
    """
    kept_frames = {}
    kept_indices = {}
    dropped = 0
    for frame, detections in frames.items():
        survivors = []
        indices = []
        for index, detection in enumerate(detections):
            if detection.confidence < min_confidence:
                continue
            if max_aspect_ratio > 0:
                aspect = detection.bbox.width / detection.bbox.height
                if not min_aspect_ratio <= aspect <= max_aspect_ratio:
                    continue
            survivors.append(detection)
            indices.append(index)
        dropped += len(detections) - len(survivors)
        kept_frames[frame] = survivors
        kept_indices[frame] = indices
    if dropped:
        logger.info("Pre-filter dropped %d detections", dropped)
    return FilteredFrames(kept_frames, kept_indices)
