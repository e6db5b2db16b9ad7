"""Writers mirroring ``ingest.readers``.

Floats are written with ``repr`` so that reading a written file gives back
the exact same values.
"""
import csv
import logging
from pathlib import Path

from core.structures import CameraTrackSet, IdMapping

from .tables import EmbeddingTable

logger = logging.getLogger(__name__)


def _number(value):
    return repr(float(value))


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open('w', encoding='utf-8', newline='')


def _box_row(frame, track_id, bbox, confidence):
    return ','.join([
        str(frame), str(track_id),
        _number(bbox.left), _number(bbox.top), _number(bbox.width), _number(bbox.height),
        _number(confidence), '-1', '-1', '-1',
    ])


def write_tracks(tracks: CameraTrackSet, path):
    """Rows sorted by (frame, id), confidence 1.0."""
    rows = tracks.tracked_boxes()
    with _open(path) as handle:
        for box in rows:
            handle.write(_box_row(box.frame, box.track_id, box.bbox, 1.0) + '\n')
    logger.debug("Wrote %d boxes of %d tracks to %s", len(rows), len(tracks), path)


def write_detections(frames, path):
    """Per-frame Detection lists to an id -1 file, frame order then list order."""
    count = 0
    with _open(path) as handle:
        for frame in sorted(frames):
            for detection in frames[frame]:
                handle.write(_box_row(detection.frame, -1, detection.bbox, detection.confidence) + '\n')
                count += 1
    logger.debug("Wrote %d detections to %s", count, path)


def write_embeddings(table: EmbeddingTable, path):
    with _open(path) as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['camera', 'track', 'frame'] + [f"e{i}" for i in range(table.dimension)])
        for key in table.keys_sorted():
            camera, track, frame = key
            writer.writerow([camera, track, frame] + [repr(float(v)) for v in table[key]])
    logger.debug("Wrote %d embeddings to %s", len(table), path)


def write_id_mapping(mapping: IdMapping, path):
    with _open(path) as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['camera', 'local_id', 'global_id'])
        for (camera, local_id), global_id in sorted(mapping.items()):
            writer.writerow([camera, local_id, global_id])
