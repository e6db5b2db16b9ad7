"""
Django settings for trafficMonitor project.

The project has no web surface: it is driven through management commands
(track, postprocess, reid, eval_detection, eval_tracking, synth).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config('SECRET_KEY', default='trafficmonitor-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'core',
    'ingest',
    'tracking',
    'postprocess',
    'reid',
    'metrics',
    'synth',
]

# All inputs and outputs are files; no database is used.
DATABASES = {}


# Pipeline defaults
# Every RunConfig field can be overridden from the environment (or a .env
# file); config files and command-line flags take precedence over these.

TRACKING_DEFAULTS = {
    'iou_match_threshold': config('IOU_MATCH_THRESHOLD', default=0.2, cast=float),
    'sort_max_age': config('SORT_MAX_AGE', default=1, cast=int),
    'sort_min_hits': config('SORT_MIN_HITS', default=1, cast=int),
    'parked_dispersion_threshold': config('PARKED_DISPERSION_THRESHOLD', default=50.0, cast=float),
    'min_box_width': config('MIN_BOX_WIDTH', default=80.0, cast=float),
    'min_box_height': config('MIN_BOX_HEIGHT', default=60.0, cast=float),
    'reid_match_threshold': config('REID_MATCH_THRESHOLD', default=0.6, cast=float),
    'reid_P': config('REID_P', default=4, cast=int),
    'reid_N': config('REID_N', default=3, cast=int),
    'eval_iou_threshold': config('EVAL_IOU_THRESHOLD', default=0.5, cast=float),
    'detection_min_confidence': config('DETECTION_MIN_CONFIDENCE', default=0.5, cast=float),
    'min_aspect_ratio': config('MIN_ASPECT_RATIO', default=0.0, cast=float),
    'max_aspect_ratio': config('MAX_ASPECT_RATIO', default=0.0, cast=float),
}

# Worker threads used when several cameras are evaluated at once.
EVAL_WORKERS = config('EVAL_WORKERS', default=4, cast=int)


# Logging
# Diagnostics go to stderr; command data goes to stdout or files.

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': config('LOG_LEVEL', default='INFO'),
    },
}
