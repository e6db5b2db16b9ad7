"""Deterministic synthetic multi-camera scenes.

Cameras are independent views. Inside a camera every appearance of an
identity drives along its own horizontal lane at constant speed and stays
inside the image; lanes are reused over time with a gap of a few frames, so
two tracks of one camera never overlap. Cross-camera identity is carried by
the embeddings alone: each identity owns a unit cluster center and every
box gets ``center + N(0, cluster_noise_sigma)``.

All randomness comes from ``numpy.random.Generator(PCG64)`` streams spawned
from ``SeedSequence(seed)``: stream 0 lays out the scene, 1 draws the box
embeddings, 2 corrupts the detections and 3 embeds tracker output.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.exceptions import SceneSpecError
from core.geometry import boxes_to_array, iou_matrix
from core.structures import BoundingBox, CameraTrackSet, Detection, IdMapping, Track
from ingest.serializers import flatten_errors
from ingest.tables import EmbeddingTable

from .serializers import SceneSpecSerializer

logger = logging.getLogger(__name__)

BOX_WIDTH_RANGE = (100.0, 180.0)
BOX_HEIGHT_RANGE = (70.0, 100.0)
LANE_HEIGHT = BOX_HEIGHT_RANGE[1] + 20.0
# empty frames between two appearances sharing a lane
SLOT_GAP = 3
MIN_APPEARANCE_FRAMES = 5
MAX_CENTER_ATTEMPTS = 10000
TRACK_MATCH_IOU = 0.3

LAYOUT_STREAM, EMBEDDING_STREAM, DETECTION_STREAM, TRACK_EMBEDDING_STREAM = range(4)


def _seed_sequence(seed, index):
    return np.random.SeedSequence(seed).spawn(index + 1)[index]


def _stream(seed, index) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, index)))


def camera_name(index):
    return f"c{index + 1:03d}"


@dataclass(frozen=True)
class SceneSpec:
    num_cameras: int = 3
    num_identities: int = 8
    frames_per_camera: int = 60
    image_width: float = 1920.0
    image_height: float = 1080.0
    min_speed: float = 5.0
    max_speed: float = 15.0
    max_cameras_per_identity: int = 3
    dropout_rate: float = 0.0
    position_noise_sigma: float = 0.0
    embedding_dim: int = 32
    cluster_noise_sigma: float = 0.05
    min_center_distance: float = 0.8
    seed: int = 0
    collapse_clusters: bool = False

    def __post_init__(self):
        serializer = SceneSpecSerializer(data=asdict(self))
        if not serializer.is_valid():
            raise SceneSpecError(f"invalid scene: {flatten_errors(serializer.errors)}")
        if self.image_width < BOX_WIDTH_RANGE[1] or self.image_height < LANE_HEIGHT:
            raise SceneSpecError(
                f"image must be at least {BOX_WIDTH_RANGE[1]:g}x{LANE_HEIGHT:g} px"
            )


@dataclass(frozen=True)
class Appearance:
    identity: int
    lane: int
    first_frame: int
    length: int
    width: float
    height: float
    left: float
    velocity: float

    def boxes(self, lane_height=LANE_HEIGHT):
        top = self.lane * lane_height + (lane_height - self.height) / 2.0
        return tuple(
            (self.first_frame + t, BoundingBox(self.left + self.velocity * t, top, self.width, self.height))
            for t in range(self.length)
        )


@dataclass(frozen=True, eq=False)
class SceneTruth:
    spec: SceneSpec
    # camera -> ground-truth tracks with local ids 1..k
    cameras: Dict[str, CameraTrackSet]
    embeddings: EmbeddingTable
    oracle: IdMapping
    # camera -> frame -> detections
    detections: Dict[str, Dict[int, List[Detection]]]
    centers: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, SceneTruth):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.cameras == other.cameras
            and self.embeddings == other.embeddings
            and self.oracle == other.oracle
            and self.detections == other.detections
            and np.array_equal(self.centers, other.centers)
        )

    def global_tracks(self) -> Dict[str, CameraTrackSet]:
        """Ground truth relabelled with global identity ids."""
        return {
            camera: tracks.replace_tracks(
                Track(self.oracle[(camera, track.id)], camera, track.boxes) for track in tracks
            )
            for camera, tracks in self.cameras.items()
        }

    def num_boxes(self):
        return sum(tracks.num_boxes() for tracks in self.cameras.values())


def cluster_centers(rng: np.random.Generator, count, dimension, min_distance,
                    collapse=False) -> np.ndarray:
    """Random unit centers, accepted one by one while their cosine distance
    to every accepted center is at least ``min_distance``."""
    def draw():
        vector = rng.normal(size=dimension)
        norm = np.linalg.norm(vector)
        return vector / norm if norm > 0 else draw()

    if collapse:
        return np.tile(draw(), (count, 1))
    centers = np.empty((count, dimension))
    for i in range(count):
        for _ in range(MAX_CENTER_ATTEMPTS):
            candidate = draw()
            if i == 0 or np.min(1.0 - centers[:i] @ candidate) >= min_distance:
                centers[i] = candidate
                break
        else:
            raise SceneSpecError(
                f"cannot place {count} cluster centers {min_distance} apart in dimension "
                f"{dimension}; use a larger embedding_dim"
            )
    return centers


def _camera_sets(rng, spec: SceneSpec) -> List[List[int]]:
    """Identities seen by each camera; every identity is seen by at least
    min(2, num_cameras) cameras."""
    low = min(2, spec.num_cameras)
    high = max(low, min(spec.num_cameras, spec.max_cameras_per_identity))
    seen = [[] for _ in range(spec.num_cameras)]
    for identity in range(1, spec.num_identities + 1):
        count = int(rng.integers(low, high + 1))
        for camera in sorted(rng.choice(spec.num_cameras, size=count, replace=False).tolist()):
            seen[camera].append(identity)
    return seen


def _schedule(rng, identities: Sequence[int], speeds, spec: SceneSpec) -> List[Appearance]:
    if not identities:
        return []
    lanes = int(spec.image_height // LANE_HEIGHT)
    slots = math.ceil(len(identities) / lanes)
    duration = spec.frames_per_camera // slots
    usable = duration if slots == 1 else duration - SLOT_GAP
    if usable < MIN_APPEARANCE_FRAMES:
        raise SceneSpecError(
            f"{len(identities)} tracks do not fit in {spec.frames_per_camera} frames; "
            f"increase frames_per_camera"
        )
    appearances = []
    positions = rng.permutation(lanes * slots)[:len(identities)]
    for identity, position in zip(identities, positions.tolist()):
        lane, slot = divmod(position, slots)
        length = int(rng.integers(max(MIN_APPEARANCE_FRAMES, usable // 2), usable + 1))
        first = slot * duration + 1 + int(rng.integers(0, usable - length + 1))
        width = float(rng.uniform(*BOX_WIDTH_RANGE))
        height = float(rng.uniform(*BOX_HEIGHT_RANGE))
        room = spec.image_width - width
        speed = min(speeds[identity - 1], room / max(length - 1, 1))
        travel = speed * (length - 1)
        direction = 1.0 if rng.random() < 0.5 else -1.0
        start = float(rng.uniform(0.0, max(room - travel, 0.0)))
        if direction < 0:
            start += travel
        appearances.append(Appearance(identity, lane, first, length, width, height, start, direction * speed))
    appearances.sort(key=lambda a: (a.first_frame, a.lane))
    return appearances


def _embed_boxes(rng, tracks: CameraTrackSet, identity_of, centers, sigma, table: EmbeddingTable):
    for track in tracks:
        center = centers[identity_of(track.id) - 1]
        noise = rng.normal(0.0, 1.0, size=(len(track), centers.shape[1])) * sigma
        for (frame, _), vector in zip(track.boxes, center + noise):
            table.add(tracks.camera, track.id, frame, vector)


def generate_scene(spec: SceneSpec) -> SceneTruth:
    layout = _stream(spec.seed, LAYOUT_STREAM)
    speeds = layout.uniform(spec.min_speed, spec.max_speed, size=spec.num_identities)

    cameras = {}
    oracle = {}
    for index, identities in enumerate(_camera_sets(layout, spec)):
        name = camera_name(index)
        appearances = _schedule(layout, identities, speeds, spec)
        tracks = [
            Track(local_id, name, appearance.boxes())
            for local_id, appearance in enumerate(appearances, start=1)
        ]
        oracle.update({(name, local_id): a.identity for local_id, a in enumerate(appearances, start=1)})
        cameras[name] = CameraTrackSet(name, tuple(tracks))

    centers = cluster_centers(layout, spec.num_identities, spec.embedding_dim,
                              spec.min_center_distance, spec.collapse_clusters)

    embedding_rng = _stream(spec.seed, EMBEDDING_STREAM)
    table = EmbeddingTable(spec.embedding_dim)
    for name, tracks in cameras.items():
        _embed_boxes(embedding_rng, tracks, lambda local_id: oracle[(name, local_id)],
                     centers, spec.cluster_noise_sigma, table)

    truth = SceneTruth(spec, cameras, table, oracle, {}, centers)
    detections = corrupt_detections(truth, spec.dropout_rate, spec.position_noise_sigma,
                                    _seed_sequence(spec.seed, DETECTION_STREAM))
    truth = replace(truth, detections=detections)
    logger.info("Scene: %d cameras, %d identities, %d boxes",
                len(cameras), spec.num_identities, truth.num_boxes())
    return truth


def jitter_boxes(ltwh: np.ndarray, sigma, rng: np.random.Generator) -> np.ndarray:
    """Move box centers by an isotropic Gaussian whose RMS length is
    ``sigma`` (``sigma / sqrt(2)`` per axis); sizes are kept."""
    shifts = rng.normal(0.0, 1.0, size=(len(ltwh), 2)) * (sigma / math.sqrt(2.0))
    moved = np.array(ltwh, dtype=float).reshape(-1, 4)
    moved[:, :2] += shifts
    return moved


def corrupt_detections(truth: SceneTruth, dropout_rate, noise_sigma,
                       seed) -> Dict[str, Dict[int, List[Detection]]]:
    """Detections from the ground truth: each box dropped with probability
    ``dropout_rate``, survivors jittered and given a confidence in [0.5, 1]."""
    if not 0.0 <= dropout_rate <= 1.0:
        raise SceneSpecError(f"dropout rate {dropout_rate} outside [0, 1]")
    if noise_sigma < 0:
        raise SceneSpecError(f"negative noise sigma {noise_sigma}")
    rng = np.random.Generator(np.random.PCG64(seed))
    output = {}
    for camera in sorted(truth.cameras):
        boxes = truth.cameras[camera].tracked_boxes()
        dropped = rng.random(len(boxes)) < dropout_rate
        moved = jitter_boxes(boxes_to_array(b.bbox for b in boxes), noise_sigma, rng)
        confidences = rng.uniform(0.5, 1.0, size=len(boxes))
        frames = {}
        for i, box in enumerate(boxes):
            if dropped[i]:
                continue
            bbox = box.bbox if noise_sigma == 0 else BoundingBox(*moved[i].tolist())
            frames.setdefault(box.frame, []).append(Detection(box.frame, bbox, float(confidences[i])))
        output[camera] = frames
        logger.debug("Camera %s: kept %d of %d boxes", camera, len(boxes) - int(dropped.sum()), len(boxes))
    return output


def embed_tracks(truth: SceneTruth, tracks: Sequence[CameraTrackSet],
                 spec: Optional[SceneSpec] = None) -> EmbeddingTable:
    """Embeddings for tracker output of a synthetic scene.

    A box takes the cluster of the ground-truth identity it overlaps most
    (IoU >= 0.3) in the same camera and frame; any other box gets a random
    unit direction.
    """
    spec = spec or truth.spec
    rng = _stream(spec.seed, TRACK_EMBEDDING_STREAM)
    table = EmbeddingTable(truth.centers.shape[1])
    for predicted in sorted(tracks, key=lambda t: t.camera):
        if predicted.camera not in truth.cameras:
            raise SceneSpecError(f"camera {predicted.camera} is not part of the scene")
        gt_frames = truth.cameras[predicted.camera].boxes_by_frame()
        unmatched = 0
        for box in predicted.tracked_boxes():
            candidates = gt_frames.get(box.frame, [])
            scores = iou_matrix(boxes_to_array([box.bbox]), boxes_to_array(c.bbox for c in candidates))[0]
            if len(scores) and scores.max() >= TRACK_MATCH_IOU:
                owner = candidates[int(np.argmax(scores))].track_id
                base = truth.centers[truth.oracle[(predicted.camera, owner)] - 1]
            else:
                base = rng.normal(size=table.dimension)
                base /= np.linalg.norm(base)
                unmatched += 1
            vector = base + rng.normal(0.0, 1.0, size=table.dimension) * spec.cluster_noise_sigma
            table.add(predicted.camera, box.track_id, box.frame, vector)
        if unmatched:
            logger.info("Camera %s: %d boxes matched no ground truth", predicted.camera, unmatched)
    return table

