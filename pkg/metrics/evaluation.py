"""Pairing of ground-truth and prediction files and per-camera evaluation."""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional

from django.conf import settings

from core.exceptions import TrackingError

logger = logging.getLogger(__name__)

TRACK_FILE_PATTERN = '*.txt'


class CameraInputs(NamedTuple):
    camera: str
    gt: Path
    # None when the prediction directory holds no file for the camera
    pred: Optional[Path]


def pair_inputs(gt, pred) -> List[CameraInputs]:
    """Pair files by camera id (file stem).

    Two files form one pair named after the ground-truth file; two
    directories are paired file by file.
    """
    gt, pred = Path(gt), Path(pred)
    if gt.is_dir() != pred.is_dir():
        raise TrackingError(f"{gt} and {pred} must both be files or both be directories")
    if not gt.is_dir():
        return [CameraInputs(gt.stem, gt, pred)]

    pairs = []
    for gt_file in sorted(gt.glob(TRACK_FILE_PATTERN)):
        pred_file = pred / gt_file.name
        if not pred_file.is_file():
            logger.warning("No prediction for camera %s in %s; scoring it as empty", gt_file.stem, pred)
            pred_file = None
        pairs.append(CameraInputs(gt_file.stem, gt_file, pred_file))
    extra = sorted({p.stem for p in pred.glob(TRACK_FILE_PATTERN)} - {p.camera for p in pairs})
    if extra:
        logger.warning("Ignoring predictions without ground truth: %s", ', '.join(extra))
    if not pairs:
        raise TrackingError(f"no ground-truth files in {gt}")
    return pairs


def warn_on_frame_mismatch(camera, gt_span, pred_span):
    if gt_span and pred_span and gt_span != pred_span:
        logger.warning("Camera %s: ground truth covers frames %d-%d, predictions %d-%d",
                       camera, gt_span[0], gt_span[1], pred_span[0], pred_span[1])


def evaluate_cameras(pairs: List[CameraInputs], evaluate: Callable[[CameraInputs], object],
                     workers=None) -> Dict[str, object]:
    """Run ``evaluate`` on every pair, concurrently; results keyed by camera."""
    workers = workers or getattr(settings, 'EVAL_WORKERS', 1)
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(pairs)))) as executor:
        results = list(executor.map(evaluate, pairs))
    return {pair.camera: result for pair, result in zip(pairs, results)}
