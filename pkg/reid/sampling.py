from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.exceptions import MissingEmbeddingError
from core.structures import Track
from ingest.tables import EmbeddingTable


def sample_indices(M: int, k: int) -> List[int]:
    """Uniform-stride sample of ``k`` positions out of ``M``: floor(i * M / k).

    Every position is returned when there are no more than ``k``.
    """
    if M < 1 or k < 1:
        raise ValueError(f"M and k must be >= 1, got M={M}, k={k}")
    if M <= k:
        return list(range(M))
    return [(i * M) // k for i in range(k)]


@dataclass(frozen=True, eq=False)
class CarSampleSet:
    camera: str
    track_id: int
    embeddings: np.ndarray
    frames: Tuple[int, ...] = ()

    def __len__(self):
        return len(self.embeddings)

    @property
    def dimension(self):
        return self.embeddings.shape[1]


def sample_track(track: Track, table: EmbeddingTable, k: int) -> CarSampleSet:
    """Sample ``k`` embeddings spread over the track's frames that carry one."""
    available = set(table.track_frames(track.camera, track.id))
    frames = [frame for frame in track.frames if frame in available]
    if not frames:
        raise MissingEmbeddingError(track.camera, track.id)
    picked = [frames[i] for i in sample_indices(len(frames), k)]
    vectors = np.stack([table[(track.camera, track.id, frame)] for frame in picked])
    return CarSampleSet(track.camera, track.id, vectors, tuple(picked))
