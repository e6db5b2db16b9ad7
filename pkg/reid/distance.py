import numpy as np

from core.exceptions import DegenerateEmbeddingError, DimensionMismatchError


def _unit_rows(vectors) -> np.ndarray:
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0):
        raise DegenerateEmbeddingError("degenerate embedding: zero vector")
    return vectors / norms[:, None]


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), in [0, 2]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if np.array_equal(a, b) and np.any(a):
        return 0.0
    return float(cosine_distance_matrix(a, b)[0, 0])


def cosine_distance_matrix(a, b) -> np.ndarray:
    """Pairwise cosine distances between the rows of ``a`` and ``b``."""
    a = _unit_rows(a)
    b = _unit_rows(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return np.clip(1.0 - a @ b.T, 0.0, 2.0)
