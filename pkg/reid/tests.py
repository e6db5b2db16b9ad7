import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import DegenerateEmbeddingError, DimensionMismatchError, MissingEmbeddingError
from core.structures import BoundingBox, CameraTrackSet, Track
from ingest.config import RunConfig
from ingest.readers import parse_id_mapping, parse_tracks
from ingest.tables import EmbeddingTable
from ingest.writers import write_embeddings, write_tracks
from metrics.mapping import mapping_accuracy
from synth.generator import SceneSpec, generate_scene

from .cascade import ReferencePool, apply_mapping, match_count, merge_into_pool, reid_cascade, reid_pair
from .distance import cosine_distance, cosine_distance_matrix
from .sampling import CarSampleSet, sample_indices, sample_track


def unit(dimension, axis):
    vector = np.zeros(dimension)
    vector[axis] = 1.0
    return vector


def samples(vectors, camera='c001', track_id=1):
    return CarSampleSet(camera, track_id, np.atleast_2d(np.asarray(vectors, dtype=float)))


def camera_with_tracks(camera, table, directions, frames=6):
    """One track per direction; every box of track i embeds ``directions[i]``."""
    tracks = []
    for track_id, direction in enumerate(directions, start=1):
        boxes = [(frame, BoundingBox(10 * frame, 100 * track_id, 100, 80)) for frame in range(1, frames + 1)]
        tracks.append(Track(track_id, camera, boxes))
        for frame, _ in boxes:
            table.add(camera, track_id, frame, direction)
    return CameraTrackSet(camera, tuple(tracks))


class CosineDistanceTests(SimpleTestCase):

    def test_examples(self):
        a = np.array([0.3, -1.2, 4.0])
        self.assertEqual(cosine_distance(a, a), 0.0)
        self.assertAlmostEqual(cosine_distance(unit(3, 0), unit(3, 1)), 1.0)
        self.assertAlmostEqual(cosine_distance(a, -a), 2.0)

    def test_zero_vector(self):
        with self.assertRaisesMessage(DegenerateEmbeddingError, 'degenerate embedding'):
            cosine_distance(np.zeros(3), unit(3, 0))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            cosine_distance(unit(3, 0), unit(4, 0))

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(5, 8)), rng.normal(size=(4, 8))
        np.testing.assert_allclose(cosine_distance_matrix(a, b), cosine_distance_matrix(3.5 * a, 0.2 * b), atol=1e-12)


class SamplingTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(sample_indices(4, 4), [0, 1, 2, 3])
        self.assertEqual(sample_indices(2, 4), [0, 1])
        self.assertEqual(sample_indices(20, 4), [0, 5, 10, 15])

    def test_strictly_increasing(self):
        for M in range(1, 40):
            for k in range(1, 8):
                indices = sample_indices(M, k)
                self.assertEqual(len(indices), min(M, k))
                self.assertTrue(all(a < b for a, b in zip(indices, indices[1:])))

    def test_sample_track_uses_frames_with_embeddings(self):
        table = EmbeddingTable(2)
        track = Track(1, 'c001', [(f, BoundingBox(0, 0, 1, 1)) for f in range(1, 9)])
        for frame in (2, 4, 6, 8):
            table.add('c001', 1, frame, [frame, 1.0])
        picked = sample_track(track, table, 2)
        self.assertEqual(picked.frames, (2, 6))

    def test_missing_embeddings_name_the_track(self):
        track = Track(7, 'c003', [(1, BoundingBox(0, 0, 1, 1))])
        with self.assertRaisesMessage(MissingEmbeddingError, 'camera c003 track 7'):
            sample_track(track, EmbeddingTable(2), 4)


class MatchCountTests(SimpleTestCase):

    def test_identical_embeddings(self):
        vector = [0.2, 0.4, 0.1]
        score = match_count(samples([vector] * 4), samples([vector] * 3), 0.6)
        self.assertEqual(score.matches, 12)
        self.assertAlmostEqual(score.mean_distance, 0.0)

    def test_orthogonal_embeddings(self):
        self.assertEqual(match_count(samples([unit(4, 0)] * 4), samples([unit(4, 1)] * 3), 0.6).matches, 0)

    def test_enumerated_distances(self):
        query = samples([[1.0, 0.0], [-1.0, 0.0]])
        # distances to query row 0 are 0.1 and 0.5, to its opposite 1.9 and 1.5
        reference = samples([[0.9, np.sqrt(1 - 0.81)], [0.5, np.sqrt(1 - 0.25)]])
        score = match_count(query, reference, 0.6)
        self.assertEqual(score.matches, 2)
        self.assertAlmostEqual(score.mean_distance, (0.1 + 0.5 + 1.9 + 1.5) / 4)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(2)
        query, reference = samples(rng.normal(size=(4, 6))), samples(rng.normal(size=(3, 6)))
        counts = [match_count(query, reference, t).matches for t in np.linspace(0, 2, 21)]
        self.assertEqual(counts, sorted(counts))

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            match_count(samples([unit(3, 0)]), samples([unit(4, 0)]), 0.6)


class ReferencePoolTests(SimpleTestCase):

    def test_most_matches_wins(self):
        pool = ReferencePool()
        pool.add(1, samples([unit(3, 0), unit(3, 1), unit(3, 1)]))
        pool.add(2, samples([unit(3, 0), unit(3, 0), unit(3, 1)]))
        self.assertEqual(pool.best_match(samples([unit(3, 0)]), 0.6), 2)

    def test_tie_goes_to_smaller_mean_distance(self):
        pool = ReferencePool()
        pool.add(1, samples([unit(3, 0), -unit(3, 0)]))
        pool.add(2, samples([unit(3, 0), unit(3, 1)]))
        self.assertEqual(pool.best_match(samples([unit(3, 0)]), 0.6), 2)

    def test_full_tie_goes_to_smaller_id(self):
        pool = ReferencePool()
        pool.add(5, samples([unit(3, 0)]))
        pool.add(3, samples([unit(3, 0)]))
        self.assertEqual(pool.best_match(samples([unit(3, 0)]), 0.6), 3)
        self.assertEqual(pool.next_global_id, 6)

    def test_no_match(self):
        pool = ReferencePool()
        pool.add(1, samples([unit(3, 0)]))
        self.assertIsNone(pool.best_match(samples([unit(3, 2)]), 0.6))


class ReidTests(SimpleTestCase):

    def test_query_takes_the_reference_id(self):
        table = EmbeddingTable(3)
        reference = camera_with_tracks('c001', table, [unit(3, 0)])
        query = camera_with_tracks('c002', table, [unit(3, 0)])
        pool = ReferencePool()
        merge_into_pool(pool, reference, {('c001', 1): 1}, table, RunConfig())
        self.assertEqual(reid_pair(query, pool, table), {('c002', 1): 1})

    def test_unmatched_query_gets_a_fresh_id(self):
        table = EmbeddingTable(4)
        reference = camera_with_tracks('c001', table, [unit(4, 0), unit(4, 1)])
        query = camera_with_tracks('c002', table, [unit(4, 2), unit(4, 1), unit(4, 3)])
        mapping = reid_cascade([query, reference], table)
        self.assertEqual(mapping, {
            ('c001', 1): 1, ('c001', 2): 2,
            ('c002', 1): 3, ('c002', 2): 2, ('c002', 3): 4,
        })

    def test_single_camera_is_the_identity(self):
        table = EmbeddingTable(3)
        camera = camera_with_tracks('c004', table, [unit(3, 0), unit(3, 1), unit(3, 2)])
        self.assertEqual(reid_cascade([camera], table), {('c004', i): i for i in (1, 2, 3)})

    def test_disjoint_identities_stay_distinct(self):
        table = EmbeddingTable(6)
        first = camera_with_tracks('c001', table, [unit(6, 0), unit(6, 1), unit(6, 2)])
        second = camera_with_tracks('c002', table, [unit(6, 3), unit(6, 4), unit(6, 5)])
        mapping = reid_cascade([first, second], table)
        self.assertEqual(len(set(mapping.values())), 6)

    def test_gaussian_clusters_recover_identities(self):
        truth = generate_scene(SceneSpec(num_cameras=2, num_identities=3, max_cameras_per_identity=2,
                                         embedding_dim=16, seed=8))
        mapping = reid_cascade(list(truth.cameras.values()), truth.embeddings)
        self.assertEqual(mapping_accuracy(mapping, truth.oracle).accuracy, 1.0)

    def test_missing_embeddings_name_the_track(self):
        table = EmbeddingTable(3)
        reference = camera_with_tracks('c001', table, [unit(3, 0)])
        query = CameraTrackSet('c002', (Track(9, 'c002', [(1, BoundingBox(0, 0, 5, 5))]),))
        with self.assertRaisesMessage(MissingEmbeddingError, 'camera c002 track 9'):
            reid_cascade([reference, query], table)

    def test_reference_ids_are_kept_and_mapping_is_total(self):
        truth = generate_scene(SceneSpec(num_cameras=3, num_identities=6, seed=5))
        mapping = reid_cascade(list(truth.cameras.values()), truth.embeddings)
        reference = truth.cameras['c001']
        for track_id in reference.ids():
            self.assertEqual(mapping[('c001', track_id)], track_id)
        self.assertEqual(set(mapping), set(truth.oracle))

    def test_scaling_embeddings_changes_nothing(self):
        truth = generate_scene(SceneSpec(num_cameras=3, num_identities=6, seed=6))
        scaled = EmbeddingTable(truth.embeddings.dimension)
        for key in truth.embeddings.keys_sorted():
            scaled.add(*key, 4.0 * truth.embeddings[key])
        cameras = list(truth.cameras.values())
        self.assertEqual(reid_cascade(cameras, truth.embeddings), reid_cascade(cameras, scaled))

    def test_six_camera_scene(self):
        truth = generate_scene(SceneSpec(num_cameras=6, num_identities=24, embedding_dim=32,
                                         cluster_noise_sigma=0.05, min_center_distance=0.8, seed=0))
        config = RunConfig().replace(reid_match_threshold=0.6, reid_P=4, reid_N=3)
        mapping = reid_cascade(list(truth.cameras.values()), truth.embeddings, config)
        self.assertGreaterEqual(mapping_accuracy(mapping, truth.oracle).accuracy, 0.95)

    def test_collapsed_clusters_merge_identities(self):
        truth = generate_scene(SceneSpec(num_cameras=6, num_identities=24, embedding_dim=32,
                                         collapse_clusters=True, seed=0))
        mapping = reid_cascade(list(truth.cameras.values()), truth.embeddings)
        self.assertLess(len(set(mapping.values())), len(set(truth.oracle.values())))


class ApplyMappingTests(SimpleTestCase):

    def test_relabels_tracks(self):
        tracks = CameraTrackSet('c002', (
            Track(1, 'c002', [(1, BoundingBox(0, 0, 5, 5))]),
            Track(2, 'c002', [(1, BoundingBox(50, 0, 5, 5))]),
        ))
        relabelled = apply_mapping(tracks, {('c002', 1): 7, ('c002', 2): 3})
        self.assertEqual(relabelled.ids(), [3, 7])
        self.assertEqual(relabelled.by_id[7].boxes, tracks.by_id[1].boxes)

    def test_merged_tracks_keep_the_lower_local_id_on_collisions(self):
        tracks = CameraTrackSet('c002', (
            Track(1, 'c002', [(1, BoundingBox(0, 0, 5, 5)), (2, BoundingBox(1, 0, 5, 5))]),
            Track(2, 'c002', [(2, BoundingBox(60, 0, 5, 5)), (3, BoundingBox(61, 0, 5, 5))]),
        ))
        with self.assertLogs('reid.cascade', level='WARNING'):
            merged = apply_mapping(tracks, {('c002', 1): 4, ('c002', 2): 4})
        self.assertEqual(merged.by_id[4].boxes, (
            (1, BoundingBox(0, 0, 5, 5)), (2, BoundingBox(1, 0, 5, 5)), (3, BoundingBox(61, 0, 5, 5)),
        ))


class ReidCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.truth = generate_scene(SceneSpec(num_cameras=3, num_identities=6, seed=3))
        self.paths = []
        for camera, tracks in self.truth.cameras.items():
            path = self.tmp / 'tracks' / f"{camera}.txt"
            write_tracks(tracks, path)
            self.paths.append(str(path))

    def tearDown(self):
        self._tmp.cleanup()

    def test_mapping_and_global_tracks(self):
        embeddings = self.tmp / 'embeddings.csv'
        write_embeddings(self.truth.embeddings, embeddings)
        out = StringIO()
        call_command('reid', *self.paths, '--embeddings', str(embeddings),
                     '--output', str(self.tmp / 'mapping.csv'), stdout=out)
        mapping = parse_id_mapping(self.tmp / 'mapping.csv')
        self.assertEqual(mapping_accuracy(mapping, self.truth.oracle).accuracy, 1.0)
        for camera in self.truth.cameras:
            relabelled = parse_tracks(self.tmp / 'global' / f"{camera}.txt")
            self.assertEqual(set(relabelled.ids()), {g for (c, _), g in mapping.items() if c == camera})
        self.assertIn('3 cameras', out.getvalue())

    def test_missing_embeddings_fail(self):
        camera = sorted(self.truth.cameras)[1]
        track_id = self.truth.cameras[camera].ids()[0]
        partial = EmbeddingTable(self.truth.embeddings.dimension)
        for key in self.truth.embeddings.keys_sorted():
            if key[:2] != (camera, track_id):
                partial.add(*key, self.truth.embeddings[key])
        embeddings = self.tmp / 'partial.csv'
        write_embeddings(partial, embeddings)
        with self.assertRaisesMessage(CommandError, f"camera {camera} track {track_id}"):
            call_command('reid', *self.paths, '--embeddings', str(embeddings),
                         '--output', str(self.tmp / 'mapping.csv'), stdout=StringIO())
