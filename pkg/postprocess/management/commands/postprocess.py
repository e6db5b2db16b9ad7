from core.commands import PipelineCommand
from ingest.readers import parse_tracks
from ingest.writers import write_tracks
from postprocess.filters import filter_small, remove_parked


class Command(PipelineCommand):
    help = 'Remove parked cars, then boxes below the minimum size'
    config_flags = ('parked_dispersion_threshold', 'min_box_width', 'min_box_height')

    def add_command_arguments(self, parser):
        parser.add_argument('--tracks', required=True, help='track file to clean')
        parser.add_argument('--output', required=True, help='track file to write')
        parser.add_argument('--camera', help='camera id (defaults to the track file name)')

    def run(self, **options):
        config = self.run_config(options)
        tracks = parse_tracks(options['tracks'], options['camera'])
        parked = remove_parked(tracks, config.parked_dispersion_threshold)
        cleaned = filter_small(parked.tracks, config.min_box_width, config.min_box_height)
        write_tracks(cleaned, options['output'])
        self.stdout.write(
            f"{tracks.camera}: kept {len(cleaned)} of {len(tracks)} tracks "
            f"({len(tracks) - len(parked.tracks)} parked), {cleaned.num_boxes()} boxes"
        )
        kept = set(parked.tracks.ids())
        for stat in parked.stats:
            if stat.track_id not in kept:
                self.stdout.write(f"  parked track {stat.track_id}: dispersion {stat.dispersion:.2f} px^2")
