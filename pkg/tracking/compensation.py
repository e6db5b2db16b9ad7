"""Motion compensation from precomputed displacements (e.g. optical flow).

A displacement ``(dx, dy)`` recorded for detection ``i`` of frame ``f``
moves that box towards where it should be in frame ``f + 1``. Indices refer
to the order of the frame's rows in the detection file.
"""
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from core.exceptions import ParseError
from core.structures import BoundingBox
from ingest.readers import csv_rows

HEADER = ['frame', 'det_index', 'dx', 'dy']


@dataclass(frozen=True)
class DisplacementField:
    shifts: Dict[int, Dict[int, Tuple[float, float]]] = field(default_factory=dict)

    def shift(self, frame, index):
        """(dx, dy) for one detection; missing entries mean no shift."""
        return self.shifts.get(frame, {}).get(index, (0.0, 0.0))

    def __bool__(self):
        return bool(self.shifts)

    def reindexed(self, kept: Dict[int, Sequence[int]]):
        """Renumber indices after detections were filtered out.

        ``kept[frame]`` lists the original indices that survived, in order.
        """
        shifts = {}
        for frame, originals in kept.items():
            per_frame = self.shifts.get(frame, {})
            moved = {new: per_frame[old] for new, old in enumerate(originals) if old in per_frame}
            if moved:
                shifts[frame] = moved
        return DisplacementField(shifts)


def apply_compensation(boxes: Sequence[BoundingBox], field: DisplacementField, frame) -> List[BoundingBox]:
    """Translate box i of ``frame`` by its displacement; sizes are untouched."""
    shifted = []
    for index, box in enumerate(boxes):
        dx, dy = field.shift(frame, index)
        shifted.append(box.translated(dx, dy) if (dx or dy) else box)
    return shifted


def parse_displacements(path) -> DisplacementField:
    shifts = {}
    with Path(path).open('rb') as handle:
        rows = csv_rows(path, handle)
        _, header = next(rows, (1, None))
        if header is None or [h.strip() for h in header] != HEADER:
            raise ParseError(path, 1, "header must be frame,det_index,dx,dy")
        for number, fields in rows:
            if len(fields) != 4:
                raise ParseError(path, number, f"expected 4 fields, found {len(fields)}")
            try:
                frame, index = int(fields[0]), int(fields[1])
                dx, dy = float(fields[2]), float(fields[3])
            except ValueError:
                raise ParseError(path, number, "non-numeric field") from None
            if not (math.isfinite(dx) and math.isfinite(dy)):
                raise ParseError(path, number, "non-finite displacement")
            if index < 0:
                raise ParseError(path, number, f"negative detection index {index}")
            per_frame = shifts.setdefault(frame, {})
            if index in per_frame:
                raise ParseError(path, number, f"duplicate entry for frame {frame} index {index}")
            per_frame[index] = (dx, dy)
    return DisplacementField(shifts)


def write_displacements(field: DisplacementField, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(HEADER)
        for frame in sorted(field.shifts):
            for index in sorted(field.shifts[frame]):
                dx, dy = field.shifts[frame][index]
                writer.writerow([frame, index, repr(float(dx)), repr(float(dy))])
