"""Descriptor matching: ratio test plus mutual-best cross-check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInput


@dataclass
class Match:
    index_a: int
    index_b: int
    distance: float


def _distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # squared euclidean distances, clipped against float cancellation
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def match_descriptors(a: np.ndarray, b: np.ndarray, ratio: float = 0.8) -> list[Match]:
    """One-to-one matches from descriptor set ``a`` into ``b``.

    For each row of ``a`` the nearest and second-nearest rows of ``b`` are
    found; a candidate survives iff ``d1 < ratio * d2`` (strict, so exact
    duplicates in ``b`` never match) and the nearest row of ``a`` seen from
    the matched ``b`` descriptor points back at it.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("descriptor lists must be nonempty")

    d2 = _distance_matrix(a, b)
    if b.shape[0] == 1:
        nearest = np.zeros(a.shape[0], dtype=int)
        d1 = np.sqrt(d2[:, 0])
        second = np.full(a.shape[0], np.inf)
    else:
        order = np.argpartition(d2, 1, axis=1)[:, :2]
        row = np.arange(a.shape[0])
        pair = np.sqrt(d2[row[:, None], order])
        swap = pair[:, 0] > pair[:, 1]
        order[swap] = order[swap][:, ::-1]
        pair[swap] = pair[swap][:, ::-1]
        nearest = order[:, 0]
        d1, second = pair[:, 0], pair[:, 1]

    reverse_nearest = np.argmin(d2, axis=0)

    matches = []
    for i in range(a.shape[0]):
        j = int(nearest[i])
        if d1[i] < ratio * second[i] and int(reverse_nearest[j]) == i:
            matches.append(Match(i, j, float(d1[i])))
    return matches
