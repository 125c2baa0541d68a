"""Fundamental-matrix estimation with RANSAC over the normalized 8-point solve."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InsufficientMatches, NoConsensus
from ..rng import SplitMix64

_CONFIDENCE = 0.99
DEFAULT_MAX_ITERS = 2000


def _positions(keypoints) -> np.ndarray:
    if hasattr(keypoints, "positions"):
        return keypoints.positions()
    arr = np.asarray(keypoints, dtype=object)
    if arr.size and hasattr(arr.flat[0], "u"):
        return np.array([[kp.u, kp.v] for kp in keypoints])
    return np.asarray(keypoints, dtype=float).reshape(-1, 2)


def _normalize(points: np.ndarray):
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    d = np.linalg.norm(points - centroid, axis=1).mean()
    s = math.sqrt(2.0) / max(d, 1e-12)
    t = np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1.0]])
    return (points - centroid) * s, t


def _eight_point(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Least-squares F with rank-2 enforcement; x_b^T F x_a = 0."""
    ua, va = pa[:, 0], pa[:, 1]
    ub, vb = pb[:, 0], pb[:, 1]
    a = np.stack(
        [ub * ua, ub * va, ub, vb * ua, vb * va, vb, ua, va, np.ones_like(ua)], axis=1
    )
    _, _, vt = np.linalg.svd(a)
    f = vt[-1].reshape(3, 3)
    u, s, vt2 = np.linalg.svd(f)
    s[2] = 0.0
    return u @ np.diag(s) @ vt2


def sampson_distance(f: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """First-order geometric distance (pixels) of correspondences to F."""
    ones = np.ones((len(pa), 1))
    xa = np.hstack([pa, ones])
    xb = np.hstack([pb, ones])
    fxa = xa @ f.T  # rows F x_a
    ftxb = xb @ f  # rows F^T x_b
    num = np.sum(xb * fxa, axis=1) ** 2
    den = fxa[:, 0] ** 2 + fxa[:, 1] ** 2 + ftxb[:, 0] ** 2 + ftxb[:, 1] ** 2
    return np.sqrt(num / np.maximum(den, 1e-30))


def _fit(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    na, ta = _normalize(pa)
    nb, tb = _normalize(pb)
    f = tb.T @ _eight_point(na, nb) @ ta
    return f


def ransac_fundamental(
    matches,
    kps_a,
    kps_b,
    epsilon_px: float = 1.0,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
):
    """Robust fundamental matrix from putative matches.

    Returns ``(F, inlier_mask)`` where F has unit Frobenius norm and rank 2,
    and the mask marks matches whose Sampson distance to the final
    (all-inlier re-estimated) F is below ``epsilon_px``. Deterministic for a
    fixed seed; terminates early once 99% inlier confidence is reached.
    """
    n = len(matches)
    if n < 8:
        raise InsufficientMatches(f"{n} matches < 8 required")
    pos_a = _positions(kps_a)
    pos_b = _positions(kps_b)
    ia = np.array([m.index_a for m in matches])
    ib = np.array([m.index_b for m in matches])
    pa = pos_a[ia]
    pb = pos_b[ib]

    rng = SplitMix64(seed)
    best_count = 0
    best_mask = None
    needed = max_iters
    it = 0
    while it < min(max_iters, needed):
        sample = rng.sample_indices(n, 8)
        try:
            f = _fit(pa[sample], pb[sample])
        except np.linalg.LinAlgError:
            it += 1
            continue
        if not np.all(np.isfinite(f)):
            it += 1
            continue
        mask = sampson_distance(f, pa, pb) < epsilon_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            w = count / n
            if w >= 1.0:
                break
            denom = math.log(max(1.0 - w**8, 1e-15))
            needed = min(max_iters, int(math.ceil(math.log(1.0 - _CONFIDENCE) / denom)))
        it += 1

    if best_count < 8 or best_mask is None:
        raise NoConsensus(f"best consensus {best_count} < 8")

    # re-estimate on all inliers, then recompute the mask against the final F
    f = _fit(pa[best_mask], pb[best_mask])
    mask = sampson_distance(f, pa, pb) < epsilon_px
    if int(mask.sum()) >= 8:
        refined = _fit(pa[mask], pb[mask])
        refined_mask = sampson_distance(refined, pa, pb) < epsilon_px
        if int(refined_mask.sum()) >= int(mask.sum()):
            f, mask = refined, refined_mask
    else:
        mask = best_mask
    if int(mask.sum()) < 8:
        raise NoConsensus("inlier set collapsed during re-estimation")

    f = f / np.linalg.norm(f)
    flat_idx = int(np.argmax(np.abs(f)))
    if f.flat[flat_idx] < 0:
        f = -f
    return f, mask
