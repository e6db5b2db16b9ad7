"""Immutable domain types shared by every app.

Frames are 1-based, as in MOTChallenge files. Boxes are continuous
rectangles in pixels: area is width * height with no +1 correction.
"""
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

from .exceptions import InvalidBoxError

# (camera, local track id) -> global id
IdMapping = Dict[Tuple[str, int], int]


@dataclass(frozen=True)
class BoundingBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        values = (self.left, self.top, self.width, self.height)
        if not all(math.isfinite(v) for v in values):
            raise InvalidBoxError(f"non-finite box {values}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidBoxError(f"non-positive box size {self.width}x{self.height}")

    @property
    def right(self):
        return self.left + self.width

    @property
    def bottom(self):
        return self.top + self.height

    @property
    def area(self):
        return self.width * self.height

    def translated(self, dx, dy):
        return BoundingBox(self.left + dx, self.top + dy, self.width, self.height)

    def as_ltwh(self):
        return (self.left, self.top, self.width, self.height)


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: BoundingBox
    confidence: float = 1.0

    def __post_init__(self):
        if self.frame < 0:
            raise InvalidBoxError(f"negative frame {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidBoxError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class TrackedBox:
    frame: int
    bbox: BoundingBox
    track_id: int

    def __post_init__(self):
        if self.track_id < 1:
            raise InvalidBoxError(f"track id {self.track_id} must be >= 1")


@dataclass(frozen=True)
class Track:
    id: int
    camera: str
    boxes: Tuple[Tuple[int, BoundingBox], ...]

    def __post_init__(self):
        object.__setattr__(self, 'boxes', tuple(self.boxes))
        if self.id < 1:
            raise InvalidBoxError(f"track id {self.id} must be >= 1")
        if not self.boxes:
            raise InvalidBoxError(f"track {self.id} has no boxes")
        frames = [frame for frame, _ in self.boxes]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise InvalidBoxError(f"track {self.id} frames are not strictly increasing")

    def __len__(self):
        return len(self.boxes)

    @property
    def frames(self):
        return [frame for frame, _ in self.boxes]

    @property
    def first_frame(self):
        return self.boxes[0][0]

    @property
    def last_frame(self):
        return self.boxes[-1][0]

    @cached_property
    def ltwh(self):
        """(n, 4) array of left, top, width, height."""
        return np.array([bbox.as_ltwh() for _, bbox in self.boxes], dtype=float)

    def tracked_boxes(self):
        return [TrackedBox(frame, bbox, self.id) for frame, bbox in self.boxes]


@dataclass(frozen=True)
class CameraTrackSet:
    camera: str
    tracks: Tuple[Track, ...] = field(default_factory=tuple)

    def __post_init__(self):
        tracks = tuple(sorted(self.tracks, key=lambda t: t.id))
        object.__setattr__(self, 'tracks', tracks)
        ids = [track.id for track in tracks]
        if len(set(ids)) != len(ids):
            raise InvalidBoxError(f"duplicate track ids in camera {self.camera}")

    def __len__(self):
        return len(self.tracks)

    def __iter__(self) -> Iterator[Track]:
        return iter(self.tracks)

    @classmethod
    def from_tracked_boxes(cls, camera, boxes: Iterable[TrackedBox]):
        grouped = defaultdict(list)
        for box in boxes:
            grouped[box.track_id].append((box.frame, box.bbox))
        tracks = [
            Track(track_id, camera, sorted(items, key=lambda item: item[0]))
            for track_id, items in grouped.items()
        ]
        return cls(camera, tuple(tracks))

    @cached_property
    def by_id(self) -> Dict[int, Track]:
        return {track.id: track for track in self.tracks}

    def ids(self):
        return [track.id for track in self.tracks]

    def num_boxes(self):
        return sum(len(track) for track in self.tracks)

    def frame_span(self):
        """(first, last) frame over all tracks, or None when empty."""
        if not self.tracks:
            return None
        return (
            min(track.first_frame for track in self.tracks),
            max(track.last_frame for track in self.tracks),
        )

    def tracked_boxes(self) -> List[TrackedBox]:
        """All boxes sorted by (frame, track id)."""
        rows = [box for track in self.tracks for box in track.tracked_boxes()]
        rows.sort(key=lambda box: (box.frame, box.track_id))
        return rows

    def boxes_by_frame(self) -> Dict[int, List[TrackedBox]]:
        grouped = defaultdict(list)
        for box in self.tracked_boxes():
            grouped[box.frame].append(box)
        return dict(grouped)

    def replace_tracks(self, tracks: Iterable[Track]):
        return CameraTrackSet(self.camera, tuple(tracks))


def group_by_frame(detections: Iterable[Detection]) -> Dict[int, List[Detection]]:
    """Group detections per frame, keeping file order inside each frame."""
    grouped = defaultdict(list)
    for detection in detections:
        grouped[detection.frame].append(detection)
    return dict(sorted(grouped.items()))


def detections_from_tracks(tracks: CameraTrackSet) -> Dict[int, List[Detection]]:
    """Per-frame detections (confidence 1.0) from a track set, ordered by track id."""
    return {
        frame: [Detection(box.frame, box.bbox, 1.0) for box in boxes]
        for frame, boxes in sorted(tracks.boxes_by_frame().items())
    }


def frame_range(frames: Mapping[int, Sequence]) -> range:
    if not frames:
        return range(0)
    return range(min(frames), max(frames) + 1)
