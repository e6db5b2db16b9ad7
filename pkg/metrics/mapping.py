"""Accuracy of a cross-camera id mapping against the true identities.

Global ids are arbitrary labels, so predicted ids are first paired with
true ids by the assignment that maximises agreement; accuracy is the share
of (camera, track) keys whose paired label is right.
"""
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.structures import IdMapping


class MappingScore(NamedTuple):
    accuracy: float
    correct: int
    total: int


def mapping_accuracy(predicted: IdMapping, oracle: IdMapping) -> MappingScore:
    """Keys of ``oracle`` missing from ``predicted`` count as wrong; keys
    only present in ``predicted`` are ignored."""
    total = len(oracle)
    if total == 0:
        return MappingScore(1.0, 0, 0)
    keys = [key for key in oracle if key in predicted]
    if not keys:
        return MappingScore(0.0, 0, total)

    pred_ids = sorted({predicted[key] for key in keys})
    true_ids = sorted({oracle[key] for key in keys})
    pred_index = {gid: i for i, gid in enumerate(pred_ids)}
    true_index = {gid: i for i, gid in enumerate(true_ids)}
    table = np.zeros((len(pred_ids), len(true_ids)), dtype=np.int64)
    for key in keys:
        table[pred_index[predicted[key]], true_index[oracle[key]]] += 1

    rows, cols = linear_sum_assignment(table, maximize=True)
    correct = int(table[rows, cols].sum())
    return MappingScore(correct / total, correct, total)
