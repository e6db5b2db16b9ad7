from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from core.exceptions import DimensionMismatchError

EmbeddingKey = Tuple[str, int, int]


@dataclass(eq=False)
class EmbeddingTable:
    """Appearance vectors keyed by (camera, track, frame).

    Vectors are stored as given; normalisation is the re-ID stage's job.
    """
    dimension: int
    entries: Dict[EmbeddingKey, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionMismatchError(f"embedding dimension {self.dimension} must be >= 1")
        entries = {}
        for key, vector in self.entries.items():
            entries[key] = self._checked(key, vector)
        self.entries = entries
        self._index = None

    def _checked(self, key, vector):
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"embedding {key} has shape {vector.shape}, expected ({self.dimension},)"
            )
        if not np.all(np.isfinite(vector)):
            raise DimensionMismatchError(f"embedding {key} has non-finite components")
        vector.setflags(write=False)
        return vector

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __getitem__(self, key):
        return self.entries[key]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        if self.dimension != other.dimension or self.entries.keys() != other.entries.keys():
            return False
        return all(np.array_equal(v, other.entries[k]) for k, v in self.entries.items())

    def add(self, camera, track, frame, vector):
        key = (camera, int(track), int(frame))
        self.entries[key] = self._checked(key, vector)
        self._index = None

    def _track_index(self):
        if self._index is None:
            index = defaultdict(list)
            for (camera, track, frame) in self.entries:
                index[(camera, track)].append(frame)
            self._index = {key: sorted(frames) for key, frames in index.items()}
        return self._index

    def track_frames(self, camera, track):
        """Sorted frames that carry an embedding for (camera, track)."""
        return list(self._track_index().get((camera, track), []))

    def keys_sorted(self):
        return sorted(self.entries)
