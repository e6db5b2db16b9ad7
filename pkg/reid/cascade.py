"""Cross-camera re-identification by sampled-embedding voting.

The first camera (by id) is the reference and keeps its ids. Every other
camera is compared, car by car, against a pool holding N sampled
embeddings per already identified car: P samples of the query car are
compared all-vs-all with the N samples of each pool car, pairs closer than
the threshold count as matches, and the pool car with most matches gives
its global id. After each camera its cars join the pool.
"""
import logging
from collections import defaultdict
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np

from core.exceptions import DimensionMismatchError, TrackingError
from core.structures import CameraTrackSet, IdMapping, Track
from ingest.config import RunConfig
from ingest.tables import EmbeddingTable

from .distance import cosine_distance_matrix
from .sampling import CarSampleSet, sample_track

logger = logging.getLogger(__name__)


class MatchScore(NamedTuple):
    matches: int
    mean_distance: float


def match_count(query: CarSampleSet, reference: CarSampleSet, threshold) -> MatchScore:
    """Count the P x N sample pairs closer than ``threshold``."""
    if query.dimension != reference.dimension:
        raise DimensionMismatchError(
            f"dimension mismatch: {query.dimension} vs {reference.dimension}"
        )
    distances = cosine_distance_matrix(query.embeddings, reference.embeddings)
    return MatchScore(int(np.count_nonzero(distances < threshold)), float(distances.mean()))


class ReferencePool:
    """Sampled cars already carrying a global id."""

    def __init__(self):
        self.global_ids: List[int] = []
        self.samples: List[CarSampleSet] = []
        self.next_global_id = 1
        self._stacked = None

    def __len__(self):
        return len(self.samples)

    def add(self, global_id, samples: CarSampleSet):
        self.global_ids.append(global_id)
        self.samples.append(samples)
        self.next_global_id = max(self.next_global_id, global_id + 1)
        self._stacked = None

    def stacked(self):
        """All pool embeddings as one matrix plus the owning entry of each row."""
        if self._stacked is None:
            vectors = np.concatenate([s.embeddings for s in self.samples])
            owners = np.repeat(np.arange(len(self.samples)), [len(s) for s in self.samples])
            self._stacked = (vectors, owners)
        return self._stacked

    def scores(self, query: CarSampleSet, threshold):
        """(matches, mean distance) of ``query`` against every pool entry."""
        vectors, owners = self.stacked()
        if query.dimension != vectors.shape[1]:
            raise DimensionMismatchError(
                f"dimension mismatch: {query.dimension} vs {vectors.shape[1]}"
            )
        distances = cosine_distance_matrix(query.embeddings, vectors)
        entries = len(self.samples)
        matches = np.bincount(owners, weights=np.count_nonzero(distances < threshold, axis=0),
                              minlength=entries)
        totals = np.bincount(owners, weights=distances.sum(axis=0), minlength=entries)
        pairs = np.bincount(owners, minlength=entries) * len(query)
        return matches.astype(int), totals / pairs

    def best_match(self, query: CarSampleSet, threshold):
        """Global id of the winning pool car, or None when nothing matches.

        Ties on match count go to the smaller mean distance, then the
        smaller global id.
        """
        if not self.samples:
            return None
        matches, means = self.scores(query, threshold)
        if matches.max() == 0:
            return None
        candidates = np.flatnonzero(matches == matches.max())
        winner = min(candidates, key=lambda i: (means[i], self.global_ids[i], i))
        return self.global_ids[winner]


def _sample_all(tracks: Iterable[Track], table: EmbeddingTable, k):
    return {track.id: sample_track(track, table, k) for track in tracks}


def reid_pair(query_cam: CameraTrackSet, pool: ReferencePool, table: EmbeddingTable,
              config: Optional[RunConfig] = None) -> IdMapping:
    """Global ids for every car of ``query_cam`` against a frozen pool.

    Cars with no match anywhere get fresh ids, in track-id order, starting
    at the pool's next free id.
    """
    config = config or RunConfig()
    queries = _sample_all(query_cam, table, config.reid_P)
    mapping = {}
    fresh = pool.next_global_id
    for track in query_cam:
        winner = pool.best_match(queries[track.id], config.reid_match_threshold)
        if winner is None:
            winner = fresh
            fresh += 1
        mapping[(query_cam.camera, track.id)] = winner
    _warn_on_collisions(query_cam.camera, mapping)
    return mapping


def _warn_on_collisions(camera, mapping):
    owners = defaultdict(list)
    for (_, local_id), global_id in mapping.items():
        owners[global_id].append(local_id)
    for global_id, local_ids in owners.items():
        if len(local_ids) > 1:
            logger.warning("Camera %s: tracks %s all mapped to global id %d",
                           camera, local_ids, global_id)


def merge_into_pool(pool: ReferencePool, cameras: CameraTrackSet, mapping: IdMapping,
                    table: EmbeddingTable, config: RunConfig):
    """Add a re-identified camera's cars (N samples each) to the pool."""
    samples = _sample_all(cameras, table, config.reid_N)
    for track in cameras:
        pool.add(mapping[(cameras.camera, track.id)], samples[track.id])


def reid_cascade(cameras: Sequence[CameraTrackSet], table: EmbeddingTable,
                 config: Optional[RunConfig] = None) -> IdMapping:
    """Re-identify cameras one after another, in ascending camera id."""
    config = config or RunConfig()
    names = [c.camera for c in cameras]
    if len(set(names)) != len(names):
        raise TrackingError(f"duplicate cameras in cascade: {names}")
    ordered = sorted(cameras, key=lambda c: c.camera)
    if not ordered:
        return {}

    pool = ReferencePool()
    reference = ordered[0]
    mapping = {(reference.camera, track.id): track.id for track in reference}
    merge_into_pool(pool, reference, mapping, table, config)
    logger.info("Reference camera %s: %d cars", reference.camera, len(reference))

    for camera in ordered[1:]:
        step = reid_pair(camera, pool, table, config)
        matched = sum(1 for gid in step.values() if gid < pool.next_global_id)
        logger.info("Camera %s: %d of %d cars matched to the pool",
                    camera.camera, matched, len(camera))
        merge_into_pool(pool, camera, step, table, config)
        mapping.update(step)
    return mapping


def apply_mapping(tracks: CameraTrackSet, mapping: IdMapping) -> CameraTrackSet:
    """Relabel local ids with global ids, merging tracks that share one.

    On a frame claimed by two merged tracks the lower local id keeps it.
    """
    merged = defaultdict(dict)
    for track in sorted(tracks, key=lambda t: t.id):
        global_id = mapping[(tracks.camera, track.id)]
        boxes = merged[global_id]
        collisions = 0
        for frame, bbox in track.boxes:
            if frame in boxes:
                collisions += 1
                continue
            boxes[frame] = bbox
        if collisions:
            logger.warning("Camera %s: track %d lost %d boxes merging into global id %d",
                           tracks.camera, track.id, collisions, global_id)
    return tracks.replace_tracks(
        Track(global_id, tracks.camera, tuple(sorted(boxes.items())))
        for global_id, boxes in merged.items()
    )
