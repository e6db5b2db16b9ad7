from core.commands import PipelineCommand
from core.structures import group_by_frame
from ingest.readers import camera_from_path, parse_detections
from ingest.writers import write_tracks
from tracking.compensation import parse_displacements
from tracking.overlap import track_overlap
from tracking.prefilter import filter_detections
from tracking.sort import track_sort


class Command(PipelineCommand):
    help = 'Track the detections of one camera with the overlap or SORT tracker'
    config_flags = (
        'iou_match_threshold', 'sort_max_age', 'sort_min_hits',
        'detection_min_confidence', 'min_aspect_ratio', 'max_aspect_ratio',
    )

    def add_command_arguments(self, parser):
        parser.add_argument('--detections', required=True, help='MOT-style detection file')
        parser.add_argument('--method', choices=['overlap', 'sort'], default='sort')
        parser.add_argument('--flow', help='displacement CSV (frame,det_index,dx,dy)')
        parser.add_argument('--camera', help='camera id (defaults to the detection file name)')
        parser.add_argument('--output', required=True, help='track file to write')

    def run(self, **options):
        config = self.run_config(options)
        camera = options['camera'] or camera_from_path(options['detections'])
        frames = group_by_frame(parse_detections(options['detections']).detections)
        filtered = filter_detections(
            frames, config.detection_min_confidence, config.min_aspect_ratio, config.max_aspect_ratio
        )
        compensation = None
        if options['flow']:
            compensation = parse_displacements(options['flow']).reindexed(filtered.kept)

        if options['method'] == 'overlap':
            tracks = track_overlap(filtered.frames, config.iou_match_threshold, compensation, camera)
        else:
            tracks = track_sort(filtered.frames, config, compensation, camera)
        write_tracks(tracks, options['output'])

        span = tracks.frame_span()
        if span is None:
            self.stdout.write(f"{camera}: 0 tracks")
        else:
            self.stdout.write(f"{camera}: {len(tracks)} tracks, frames {span[0]}-{span[1]}")
