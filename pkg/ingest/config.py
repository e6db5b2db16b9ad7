"""Run configuration.

Precedence, lowest first: dataclass defaults, ``settings.TRACKING_DEFAULTS``
(environment through decouple), the ``key = value`` config file, then
explicit overrides (command-line flags).
"""
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from django.conf import settings

from core.exceptions import ConfigError

from .serializers import RunConfigSerializer, flatten_errors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    iou_match_threshold: float = 0.2
    sort_max_age: int = 1
    sort_min_hits: int = 1
    parked_dispersion_threshold: float = 50.0
    min_box_width: float = 80.0
    min_box_height: float = 60.0
    reid_match_threshold: float = 0.6
    reid_P: int = 4
    reid_N: int = 3
    eval_iou_threshold: float = 0.5
    detection_min_confidence: float = 0.5
    min_aspect_ratio: float = 0.0
    max_aspect_ratio: float = 0.0

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def replace(self, **changes):
        return build_run_config({**asdict(self), **changes})


def build_run_config(values, source='configuration'):
    serializer = RunConfigSerializer(data=values)
    if not serializer.is_valid():
        raise ConfigError(f"{source}: {flatten_errors(serializer.errors)}")
    return RunConfig(**serializer.validated_data)


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    known = set(RunConfig.field_names())
    values = {}
    with path.open('rb') as handle:
        for number, raw in enumerate(handle, start=1):
            try:
                raw = raw.decode('utf-8')
            except UnicodeDecodeError:
                raise ConfigError(f"{path}: invalid UTF-8 at line {number}") from None
            if '\0' in raw:
                raise ConfigError(f"{path}: NUL byte at line {number}")
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}: expected 'key = value' at line {number}")
            key, value = (part.strip() for part in line.split('=', 1))
            if key not in known:
                raise ConfigError(f"{path}: unknown key '{key}' at line {number}")
            if key in values:
                raise ConfigError(f"{path}: duplicate key '{key}' at line {number}")
            if not value:
                raise ConfigError(f"{path}: missing value for '{key}' at line {number}")
            values[key] = value
    return values


def load_run_config(path=None, overrides=None):
    values = asdict(RunConfig())
    env_defaults = getattr(settings, 'TRACKING_DEFAULTS', {}) if settings.configured else {}
    values.update({k: v for k, v in env_defaults.items() if k in values})
    source = 'configuration'
    if path is not None:
        values.update(read_config_file(path))
        source = str(path)
    if overrides:
        unknown = set(overrides) - set(values)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        values.update({k: v for k, v in overrides.items() if v is not None})
    config = build_run_config(values, source)
    logger.debug("Run configuration: %s", config)
    return config
