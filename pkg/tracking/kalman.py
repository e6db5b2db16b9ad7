"""Constant-velocity Kalman filter over box state (u, v, s, r, u', v', s').

u, v is the box center, s its area and r its aspect ratio (width / height);
the aspect ratio has no velocity term. The noise magnitudes follow the
original SORT tracker and are fixed, not configurable.
"""
from dataclasses import dataclass

import numpy as np
from filterpy.kalman.kalman_filter import predict, update

from core.structures import BoundingBox

STATE_DIM = 7
MEASUREMENT_DIM = 4

TRANSITION = np.eye(STATE_DIM)
TRANSITION[0, 4] = TRANSITION[1, 5] = TRANSITION[2, 6] = 1.0

OBSERVATION = np.zeros((MEASUREMENT_DIM, STATE_DIM))
OBSERVATION[:, :MEASUREMENT_DIM] = np.eye(MEASUREMENT_DIM)

PROCESS_NOISE = np.diag([1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2, 1e-4])
MEASUREMENT_NOISE = np.diag([1.0, 1.0, 10.0, 1e-2])
INITIAL_COVARIANCE = np.diag([10.0, 10.0, 10.0, 10.0, 1e3, 1e3, 1e3])

# smallest area/aspect a predicted state may report as a box
_MIN_POSITIVE = 1e-6


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(STATE_DIM)
        covariance = np.array(self.covariance, dtype=float).reshape(STATE_DIM, STATE_DIM)
        mean.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'covariance', covariance)

    @classmethod
    def from_box(cls, bbox: BoundingBox):
        mean = np.zeros(STATE_DIM)
        mean[:MEASUREMENT_DIM] = box_to_measurement(bbox)
        return cls(mean, INITIAL_COVARIANCE)

    def to_box(self) -> BoundingBox:
        return measurement_to_box(self.mean[:MEASUREMENT_DIM])


def box_to_measurement(bbox: BoundingBox) -> np.ndarray:
    u = bbox.left + bbox.width / 2.0
    v = bbox.top + bbox.height / 2.0
    return np.array([u, v, bbox.width * bbox.height, bbox.width / bbox.height])


def measurement_to_box(z) -> BoundingBox:
    u, v, s, r = (float(value) for value in z[:MEASUREMENT_DIM])
    s = max(s, _MIN_POSITIVE)
    r = max(r, _MIN_POSITIVE)
    width = np.sqrt(s * r)
    height = s / width
    return BoundingBox(u - width / 2.0, v - height / 2.0, float(width), float(height))


def _symmetric(matrix):
    return (matrix + matrix.T) / 2.0


def predict_arrays(mean, covariance):
    if mean[2] + mean[6] <= 0:
        mean = mean.copy()
        mean[6] = 0.0
    mean, covariance = predict(mean, covariance, F=TRANSITION, Q=PROCESS_NOISE)
    return mean, _symmetric(covariance)


def update_arrays(mean, covariance, z):
    mean, covariance = update(mean, covariance, z, MEASUREMENT_NOISE, OBSERVATION)
    return mean, _symmetric(covariance)


def kalman_predict(state: KalmanState) -> KalmanState:
    """Propagate one frame; a predicted non-positive area zeroes the area velocity first."""
    return KalmanState(*predict_arrays(state.mean, state.covariance))


def kalman_update(state: KalmanState, observation: BoundingBox) -> KalmanState:
    return KalmanState(*update_arrays(state.mean, state.covariance, box_to_measurement(observation)))


def multi_predict(means, covariances):
    """``predict_arrays`` over stacked (n, 7) means and (n, 7, 7) covariances."""
    means = np.array(means, dtype=float).reshape(-1, STATE_DIM)
    means[means[:, 2] + means[:, 6] <= 0, 6] = 0.0
    means = means @ TRANSITION.T
    covariances = TRANSITION @ covariances @ TRANSITION.T + PROCESS_NOISE
    return means, (covariances + covariances.transpose(0, 2, 1)) / 2.0


def multi_update(means, covariances, measurements):
    """``update_arrays`` over stacked states and (n, 4) measurements, with the
    same Joseph-form covariance update."""
    projected = covariances[:, :MEASUREMENT_DIM, :MEASUREMENT_DIM] + MEASUREMENT_NOISE
    gain = np.linalg.solve(projected, covariances[:, :MEASUREMENT_DIM, :]).transpose(0, 2, 1)
    innovation = np.asarray(measurements, dtype=float) - means[:, :MEASUREMENT_DIM]
    means = means + (gain @ innovation[:, :, None])[:, :, 0]
    residual = np.eye(STATE_DIM) - gain @ OBSERVATION
    covariances = (residual @ covariances @ residual.transpose(0, 2, 1)
                   + gain @ MEASUREMENT_NOISE @ gain.transpose(0, 2, 1))
    return means, (covariances + covariances.transpose(0, 2, 1)) / 2.0


def means_to_ltwh(means) -> np.ndarray:
    """(n, 4) ltwh boxes of stacked states, clamped like ``measurement_to_box``."""
    means = np.asarray(means, dtype=float).reshape(-1, STATE_DIM)
    area = np.maximum(means[:, 2], _MIN_POSITIVE)
    aspect = np.maximum(means[:, 3], _MIN_POSITIVE)
    width = np.sqrt(area * aspect)
    height = area / width
    return np.column_stack([means[:, 0] - width / 2.0, means[:, 1] - height / 2.0, width, height])
