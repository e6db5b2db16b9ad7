class TrackingError(Exception):
    """Base class for every error raised by the pipeline."""


class InvalidBoxError(TrackingError, ValueError):
    pass


class ParseError(TrackingError):
    """A malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        self.message = message
        if line is None:
            super().__init__(f"{self.path}: {message}")
        else:
            super().__init__(f"{self.path}: {message} at line {line}")


class ConfigError(TrackingError):
    pass


class DegenerateEmbeddingError(TrackingError, ValueError):
    pass


class DimensionMismatchError(TrackingError, ValueError):
    pass


class MissingEmbeddingError(TrackingError):
    def __init__(self, camera, track):
        self.camera = camera
        self.track = track
        super().__init__(f"no embeddings for camera {camera} track {track}")


class SceneSpecError(TrackingError):
    pass
