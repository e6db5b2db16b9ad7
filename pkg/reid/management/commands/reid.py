from pathlib import Path

from core.commands import PipelineCommand
from ingest.readers import parse_embeddings, parse_tracks
from ingest.writers import write_id_mapping, write_tracks
from reid.cascade import apply_mapping, reid_cascade


class Command(PipelineCommand):
    help = 'Assign global ids across cameras by cascade re-identification'
    config_flags = ('reid_match_threshold', 'reid_P', 'reid_N')

    def add_command_arguments(self, parser):
        parser.add_argument('tracks', nargs='+', help='one track file per camera, named after the camera')
        parser.add_argument('--embeddings', required=True, help='embedding CSV covering every track')
        parser.add_argument('--output', required=True, help='id mapping CSV to write')
        parser.add_argument('--output-dir', help='directory for the relabelled track files '
                                                 '(defaults to "global" next to the mapping)')

    def run(self, **options):
        config = self.run_config(options)
        cameras = [parse_tracks(path) for path in options['tracks']]
        table = parse_embeddings(options['embeddings'])
        mapping = reid_cascade(cameras, table, config)
        write_id_mapping(mapping, options['output'])

        output_dir = Path(options['output_dir'] or Path(options['output']).parent / 'global')
        for tracks in cameras:
            write_tracks(apply_mapping(tracks, mapping), output_dir / f"{tracks.camera}.txt")

        self.stdout.write(
            f"{len(cameras)} cameras, {len(mapping)} tracks -> {len(set(mapping.values()))} global ids"
        )
