"""Readers for MOTChallenge-style box files, embedding tables and id mappings.

Box rows: ``frame,id,left,top,width,height,confidence,x,y,z`` with 1-based
frames and id -1 for unassigned detections.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple

from core.exceptions import ParseError
from core.structures import BoundingBox, CameraTrackSet, Detection, IdMapping, TrackedBox

from .serializers import EmbeddingHeaderSerializer, IdMappingRowSerializer, flatten_errors
from .tables import EmbeddingTable

logger = logging.getLogger(__name__)

DETECTION_FIELDS = 10
UNASSIGNED_ID = -1


@dataclass(frozen=True)
class DetectionFileRow:
    frame: int
    id: int
    left: float
    top: float
    width: float
    height: float
    confidence: float
    world_x: float = -1.0
    world_y: float = -1.0
    world_z: float = -1.0


class ParsedDetections(NamedTuple):
    detections: List[Detection]
    tracked: List[TrackedBox]


def _int_field(path, number, name, text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, number, f"non-numeric {name} '{text.strip()}'") from None
    if not value.is_integer():
        raise ParseError(path, number, f"non-integer {name} '{text.strip()}'")
    return int(value)


def _float_field(path, number, name, text):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, number, f"non-numeric {name} '{text.strip()}'") from None
    if not math.isfinite(value):
        raise ParseError(path, number, f"non-finite {name}")
    return value


def decoded_lines(path, handle):
    """Lines of a binary handle decoded as UTF-8, line endings kept."""
    for number, raw in enumerate(handle, start=1):
        try:
            line = raw.decode('utf-8')
        except UnicodeDecodeError:
            raise ParseError(path, number, "invalid UTF-8") from None
        if '\0' in line:
            raise ParseError(path, number, "NUL byte")
        yield line


def csv_rows(path, handle):
    """Non-blank CSV rows of a binary handle with their 1-based line numbers."""
    reader = csv.reader(decoded_lines(path, handle))
    try:
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            yield reader.line_num, fields
    except csv.Error as exc:
        raise ParseError(path, reader.line_num, f"malformed row ({exc})") from None


def _iter_rows(path):
    with Path(path).open('rb') as handle:
        yield from csv_rows(path, handle)


def _numbered_rows(path):
    for number, fields in _iter_rows(path):
        if len(fields) != DETECTION_FIELDS:
            raise ParseError(
                path, number, f"expected {DETECTION_FIELDS} fields, found {len(fields)}"
            )
        frame = _int_field(path, number, 'frame', fields[0])
        track_id = _int_field(path, number, 'id', fields[1])
        left, top, width, height = (
            _float_field(path, number, name, text)
            for name, text in zip(('left', 'top', 'width', 'height'), fields[2:6])
        )
        confidence = 1.0 if not fields[6].strip() else _float_field(path, number, 'confidence', fields[6])
        world = [_float_field(path, number, 'world coordinate', text) for text in fields[7:10]]

        if frame < 1:
            raise ParseError(path, number, f"frame {frame} must be >= 1")
        if track_id < 1 and track_id != UNASSIGNED_ID:
            raise ParseError(path, number, f"invalid id {track_id}")
        if width <= 0 or height <= 0:
            raise ParseError(path, number, "non-positive box size")
        if confidence == -1.0:
            confidence = 1.0
        if not 0.0 <= confidence <= 1.0:
            raise ParseError(path, number, f"confidence {confidence} outside [0, 1]")
        yield number, DetectionFileRow(frame, track_id, left, top, width, height, confidence, *world)


def read_rows(path) -> List[DetectionFileRow]:
    return [row for _, row in _numbered_rows(path)]


def parse_detections(path) -> ParsedDetections:
    """One Detection per row in file order, plus a TrackedBox for every row with an id."""
    detections = []
    tracked = []
    for row in read_rows(path):
        bbox = BoundingBox(row.left, row.top, row.width, row.height)
        detections.append(Detection(row.frame, bbox, row.confidence))
        if row.id != UNASSIGNED_ID:
            tracked.append(TrackedBox(row.frame, bbox, row.id))
    logger.debug("Parsed %d rows (%d with ids) from %s", len(detections), len(tracked), path)
    return ParsedDetections(detections, tracked)


def camera_from_path(path):
    return Path(path).stem


def parse_tracks(path, camera=None) -> CameraTrackSet:
    """Track file to CameraTrackSet; rows without an id are an error."""
    camera = camera or camera_from_path(path)
    boxes = []
    seen = set()
    for number, row in _numbered_rows(path):
        if row.id == UNASSIGNED_ID:
            raise ParseError(path, number, "missing track id")
        if (row.frame, row.id) in seen:
            raise ParseError(path, number, f"track {row.id} appears twice in frame {row.frame}")
        seen.add((row.frame, row.id))
        boxes.append(TrackedBox(row.frame, BoundingBox(row.left, row.top, row.width, row.height), row.id))
    return CameraTrackSet.from_tracked_boxes(camera, boxes)


def parse_embeddings(path) -> EmbeddingTable:
    rows = _iter_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "missing header") from None
    serializer = EmbeddingHeaderSerializer(data={'columns': [h.strip() for h in header]})
    if not serializer.is_valid():
        raise ParseError(path, 1, flatten_errors(serializer.errors))
    width = len(header)
    table = EmbeddingTable(width - 3)
    for number, fields in rows:
        if len(fields) != width:
            raise ParseError(path, number, f"expected {width} fields, found {len(fields)}")
        camera = fields[0].strip()
        if not camera:
            raise ParseError(path, number, "empty camera")
        track = _int_field(path, number, 'track', fields[1])
        frame = _int_field(path, number, 'frame', fields[2])
        if (camera, track, frame) in table:
            raise ParseError(path, number, f"duplicate key ({camera}, {track}, {frame})")
        vector = [_float_field(path, number, 'embedding', text) for text in fields[3:]]
        table.add(camera, track, frame, vector)
    logger.debug("Parsed %d embeddings of dimension %d from %s", len(table), table.dimension, path)
    return table


def parse_id_mapping(path) -> IdMapping:
    rows = _iter_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "missing header") from None
    if [h.strip() for h in header] != ['camera', 'local_id', 'global_id']:
        raise ParseError(path, 1, "header must be camera,local_id,global_id")
    mapping = {}
    for number, fields in rows:
        if len(fields) != 3:
            raise ParseError(path, number, f"expected 3 fields, found {len(fields)}")
        serializer = IdMappingRowSerializer(data=dict(zip(('camera', 'local_id', 'global_id'), fields)))
        if not serializer.is_valid():
            raise ParseError(path, number, flatten_errors(serializer.errors))
        row = serializer.validated_data
        key = (row['camera'], row['local_id'])
        if key in mapping:
            raise ParseError(path, number, f"duplicate key {key}")
        mapping[key] = row['global_id']
    return mapping
