from pathlib import Path

from core.commands import PipelineCommand
from ingest.readers import parse_tracks
from ingest.writers import write_detections, write_embeddings, write_id_mapping, write_tracks
from synth.generator import SceneSpec, embed_tracks, generate_scene

# option name -> SceneSpec field
SCENE_OPTIONS = {
    'cameras': 'num_cameras',
    'identities': 'num_identities',
    'frames': 'frames_per_camera',
    'width': 'image_width',
    'height': 'image_height',
    'min_speed': 'min_speed',
    'max_speed': 'max_speed',
    'max_cameras_per_identity': 'max_cameras_per_identity',
    'dropout': 'dropout_rate',
    'noise': 'position_noise_sigma',
    'embedding_dim': 'embedding_dim',
    'cluster_noise': 'cluster_noise_sigma',
    'min_center_distance': 'min_center_distance',
    'seed': 'seed',
}


class Command(PipelineCommand):
    help = 'Generate a seeded synthetic multi-camera scene with its ground truth'

    def add_command_arguments(self, parser):
        parser.add_argument('--output-dir', required=True)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--cameras', type=int)
        parser.add_argument('--identities', type=int)
        parser.add_argument('--frames', type=int, help='frames per camera')
        parser.add_argument('--width', type=float, help='image width in px')
        parser.add_argument('--height', type=float, help='image height in px')
        parser.add_argument('--min-speed', type=float, help='px per frame')
        parser.add_argument('--max-speed', type=float, help='px per frame')
        parser.add_argument('--max-cameras-per-identity', type=int)
        parser.add_argument('--dropout', type=float, help='probability of dropping a detection')
        parser.add_argument('--noise', type=float, help='RMS jitter of detection centers in px')
        parser.add_argument('--embedding-dim', type=int)
        parser.add_argument('--cluster-noise', type=float, help='embedding noise sigma')
        parser.add_argument('--min-center-distance', type=float,
                            help='minimum cosine distance between identity clusters')
        parser.add_argument('--collapse-clusters', action='store_true',
                            help='give every identity the same embedding cluster')
        parser.add_argument('--embed-tracks', metavar='DIR',
                            help='also embed the track files in DIR (tracker output of this scene)')

    def run(self, **options):
        values = {field: options[name] for name, field in SCENE_OPTIONS.items() if options.get(name) is not None}
        spec = SceneSpec(collapse_clusters=options['collapse_clusters'], **values)
        truth = generate_scene(spec)
        output = Path(options['output_dir'])

        global_tracks = truth.global_tracks()
        for camera, tracks in truth.cameras.items():
            write_tracks(tracks, output / 'gt' / f"{camera}.txt")
            write_tracks(global_tracks[camera], output / 'gt_global' / f"{camera}.txt")
            write_detections(truth.detections[camera], output / 'detections' / f"{camera}.txt")
        write_embeddings(truth.embeddings, output / 'embeddings.csv')
        write_id_mapping(truth.oracle, output / 'oracle_mapping.csv')
        self.stdout.write(
            f"{len(truth.cameras)} cameras, {spec.num_identities} identities, "
            f"{truth.num_boxes()} boxes written to {output}"
        )

        if options['embed_tracks']:
            track_dir = Path(options['embed_tracks'])
            tracks = [parse_tracks(path) for path in sorted(track_dir.glob('*.txt'))]
            table = embed_tracks(truth, tracks)
            write_embeddings(table, output / 'embeddings_tracks.csv')
            self.stdout.write(f"{len(table)} embeddings for {len(tracks)} track files")
