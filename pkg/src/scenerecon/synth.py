"""Synthetic ground-truth scenes: geometry, trajectories, rendered frames.

This is the oracle layer for the whole pipeline. Everything is derived
deterministically from a single seed through the SplitMix64 generator, so a
scene is reproducible bit-for-bit on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import BadParameters, TooFewEntities
from .geometry import CameraIntrinsics, CameraPose
from .rng import SplitMix64

TRAJECTORIES = ("arc", "line", "orbit")


@dataclass
class SynthScene:
    """Ground-truth points, cameras and per-point blob rendering attributes."""

    seed: int
    points: np.ndarray  # (N,3)
    colors: np.ndarray  # (N,3) uint8
    cameras: list[tuple[CameraPose, CameraIntrinsics]]
    image_size: tuple[int, int]  # (width, height)
    blob_sigma: np.ndarray = field(repr=False, default=None)
    blob_gain: np.ndarray = field(repr=False, default=None)
    blob_texture: np.ndarray = field(repr=False, default=None)  # (N, t, t)

    @property
    def diameter(self) -> float:
        """Largest pairwise distance between scene points."""
        d2 = np.sum((self.points[:, None, :] - self.points[None, :, :]) ** 2, axis=2)
        return float(math.sqrt(d2.max()))

    def intrinsics_for(self, image_size: tuple[int, int]) -> CameraIntrinsics:
        """Intrinsics rescaled from the nominal image size to another size."""
        k = self.cameras[0][1]
        w, h = image_size
        w0, h0 = self.image_size
        if (w, h) == (w0, h0):
            return k
        sx, sy = w / w0, h / h0
        return CameraIntrinsics(
            fx=k.fx * sx, fy=k.fy * sy,
            cx=(k.cx + 0.5) * sx - 0.5, cy=(k.cy + 0.5) * sy - 0.5,
            k1=k.k1, k2=k.k2,
        )


def _look_at(center: np.ndarray, target: np.ndarray) -> CameraPose:
    forward = target - center
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 1.0, 0.0])
    if abs(forward @ up) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    x_cam = np.cross(up, forward)
    x_cam = x_cam / np.linalg.norm(x_cam)
    y_cam = np.cross(forward, x_cam)
    rot = np.vstack([x_cam, y_cam, forward])
    return CameraPose(rot, -rot @ center)


def _camera_centers(trajectory: str, n: int, radius: float, rng: SplitMix64) -> np.ndarray:
    centers = np.zeros((n, 3))
    if trajectory == "orbit":
        for i in range(n):
            a = 2.0 * math.pi * i / n
            centers[i] = (radius * math.sin(a), rng.uniform(-0.08, 0.08), radius * math.cos(a))
    elif trajectory == "arc":
        span = 2.0 * math.pi / 3.0
        for i in range(n):
            a = -span / 2 + span * (i / max(n - 1, 1))
            centers[i] = (radius * math.sin(a), rng.uniform(-0.08, 0.08), radius * math.cos(a))
    elif trajectory == "line":
        # slow lateral dolly: small view swing per frame, large overall sweep
        for i in range(n):
            s = -1.0 + 2.0 * (i / max(n - 1, 1))
            centers[i] = (0.38 * s, rng.uniform(-0.04, 0.04), 0.95)
    else:
        raise BadParameters(f"unknown trajectory {trajectory!r}")
    return centers


def _shell_point(rng: SplitMix64, half: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """One random point on the surface of the box with the given half extents."""
    r = rng.uniform(0.0, float(areas.sum()))
    face = int(np.searchsorted(np.cumsum(areas), r))
    axis = face // 2
    sign = 1.0 if face % 2 == 0 else -1.0
    p = np.empty(3)
    p[axis] = sign * half[axis]
    others = [j for j in range(3) if j != axis]
    for j in others:
        p[j] = rng.uniform(-half[j], half[j])
    return p


def _sample_shell(rng: SplitMix64, n_points: int, half: np.ndarray, min_dist: float) -> np.ndarray:
    """Dart-throwing on the box shell (room walls, floor and ceiling)."""
    areas = np.array(
        [
            half[1] * half[2],
            half[1] * half[2],
            half[0] * half[2],
            half[0] * half[2],
            half[0] * half[1],
            half[0] * half[1],
        ]
    )
    accepted: list[np.ndarray] = []
    grid: dict[tuple[int, int, int], list[int]] = {}
    cell = max(min_dist, 1e-6)
    while len(accepted) < n_points:
        best = None
        for _ in range(40):
            p = _shell_point(rng, half, areas)
            key = tuple((p // cell).astype(int))
            ok = True
            for dk in np.ndindex(3, 3, 3):
                neigh = (key[0] + dk[0] - 1, key[1] + dk[1] - 1, key[2] + dk[2] - 1)
                for idx in grid.get(neigh, ()):
                    if np.sum((accepted[idx] - p) ** 2) < min_dist * min_dist:
                        ok = False
                        break
                if not ok:
                    break
            best = p
            if ok:
                break
        grid.setdefault(tuple((best // cell).astype(int)), []).append(len(accepted))
        accepted.append(best)
    return np.array(accepted)


def generate_scene(
    seed: int,
    n_points: int,
    n_cameras: int,
    trajectory: str = "orbit",
    noise_px: float = 0.0,
    image_size: tuple[int, int] = (640, 480),
) -> tuple[SynthScene, list[np.ndarray]]:
    """Build a seeded scene and exact (optionally noisy) observations.

    Points lie on a room shell (walls, floor, ceiling) and the cameras move
    inside the room looking at the point centroid, the way hand-held room
    footage does: ``orbit`` sweeps a full circle, ``arc`` a 120-degree
    sector, ``line`` a straight lateral dolly. Each camera sees the part of
    the shell in front of it.

    Returns the scene plus one observation array per camera with rows
    ``(point_index, u, v)`` for the points visible in that camera;
    occlusion is ignored. Every point is visible from at least two cameras.
    """
    if n_points < 8 or n_cameras < 2:
        raise BadParameters("need n_points >= 8 and n_cameras >= 2")
    if trajectory not in TRAJECTORIES:
        raise BadParameters(f"trajectory must be one of {TRAJECTORIES}")
    if noise_px < 0:
        raise BadParameters("noise_px must be >= 0")
    w, h = image_size
    rng = SplitMix64(seed)

    half = np.array([2.0, 1.5, 1.25])
    shell_area = 8.0 * (half[0] * half[1] + half[0] * half[2] + half[1] * half[2])
    min_dist = min(0.13, 0.6 * math.sqrt(shell_area / max(n_points, 1)))
    points = _sample_shell(rng, n_points, half, min_dist=min_dist)
    colors = np.array(
        [[120 + rng.randint(136) for _ in range(3)] for _ in range(n_points)],
        dtype=np.uint8,
    )
    # Blob scale floor sits above the detector's first searchable scale.
    # Each point renders as a rigid textured stamp (gaussian envelope over a
    # seeded random texture plus a dominant central lobe): the stamp is
    # identical in every frame, so descriptors stay distinctive and
    # matchable across wide viewpoint changes even though neighbouring
    # points shift by parallax.
    blob_sigma = np.array([rng.uniform(2.3, 3.1) for _ in range(n_points)])
    blob_gain = np.array([rng.uniform(0.55, 1.0) for _ in range(n_points)])
    tex_size = 7
    blob_texture = np.array(
        [
            [[rng.uniform(0.0, 1.0) for _ in range(tex_size)] for _ in range(tex_size)]
            for _ in range(n_points)
        ]
    )

    centroid = points.mean(axis=0)
    centers = _camera_centers(trajectory, n_cameras, radius=0.55, rng=rng)
    poses = [_look_at(c, centroid) for c in centers]

    # fixed wide field of view; each camera sees part of the shell
    focal = 0.72 * w
    k = CameraIntrinsics(fx=focal, fy=focal, cx=(w - 1) / 2.0, cy=(h - 1) / 2.0)

    scene = SynthScene(
        seed=seed,
        points=points,
        colors=colors,
        cameras=[(p, k) for p in poses],
        image_size=(w, h),
        blob_sigma=blob_sigma,
        blob_gain=blob_gain,
        blob_texture=blob_texture,
    )

    def visibility() -> np.ndarray:
        vis = np.zeros((n_cameras, len(points)), dtype=bool)
        margin = 6.0
        for ci, pose in enumerate(poses):
            px, depth = geo.project_many(points, pose, k)
            vis[ci] = (
                (depth > 0.25)
                & (px[:, 0] >= margin)
                & (px[:, 0] <= w - 1 - margin)
                & (px[:, 1] >= margin)
                & (px[:, 1] <= h - 1 - margin)
            )
        return vis

    # every point must be visible from at least two cameras; points that
    # fall into blind spots are resampled deterministically
    face_areas = np.array(
        [
            half[1] * half[2],
            half[1] * half[2],
            half[0] * half[2],
            half[0] * half[2],
            half[0] * half[1],
            half[0] * half[1],
        ]
    )
    vis = visibility()
    for _ in range(50):
        bad = np.where(vis.sum(axis=0) < 2)[0]
        if not len(bad):
            break
        for i in bad:
            if trajectory == "orbit":
                points[i] = _shell_point(rng, half, face_areas)
            else:
                points[i] = np.array([rng.uniform(-half[j], half[j]) for j in range(3)])
        vis = visibility()
    else:
        raise BadParameters("could not place all points in view of two cameras")

    observations = []
    for ci, pose in enumerate(poses):
        idx = np.where(vis[ci])[0]
        px, _ = geo.project_many(points[idx], pose, k)
        obs = np.empty((len(idx), 3))
        obs[:, 0] = idx
        obs[:, 1:] = px
        if noise_px > 0:
            noise = np.array(
                [[rng.normal(0.0, noise_px), rng.normal(0.0, noise_px)] for _ in range(len(idx))]
            )
            obs[:, 1:] += noise
        observations.append(obs)
    return scene, observations


def render_frames(scene: SynthScene, image_size: tuple[int, int] | None = None) -> list[np.ndarray]:
    """Render one color frame per camera by splatting textured gaussian blobs.

    Each point becomes a stamp at its exact projection: a gaussian envelope
    modulating a seeded per-point random texture, plus a dominant central
    lobe that anchors the detected position. The stamp is unique per point
    and identical in every frame, which keeps descriptors distinctive and
    matchable under large viewpoint changes. Returns uint8 (H,W,3) arrays.
    """
    size = image_size or scene.image_size
    w, h = size
    k = scene.intrinsics_for(size)
    frames = []
    color_f = scene.colors.astype(np.float64) / 255.0
    tex_size = scene.blob_texture.shape[1] if scene.blob_texture is not None else 7
    tex_half = (tex_size - 1) / 2.0
    for pose, _ in scene.cameras:
        img = np.zeros((h, w, 3))
        if len(scene.points):
            px, depth = geo.project_many(scene.points, pose, k)
            for i in range(len(scene.points)):
                if depth[i] <= 0:
                    continue
                u, v = px[i]
                sig = scene.blob_sigma[i]
                gain = scene.blob_gain[i]
                r = int(math.ceil(2.9 * sig))
                u0, u1 = int(math.floor(u)) - r, int(math.floor(u)) + r + 1
                v0, v1 = int(math.floor(v)) - r, int(math.floor(v)) + r + 1
                cu0, cu1 = max(u0, 0), min(u1, w)
                cv0, cv1 = max(v0, 0), min(v1, h)
                if cu0 >= cu1 or cv0 >= cv1:
                    continue
                uu = np.arange(cu0, cu1)[None, :] - u
                vv = np.arange(cv0, cv1)[:, None] - v
                r2 = uu * uu + vv * vv
                envelope = np.exp(-r2 / (2.0 * sig * sig))
                # texture sampled bilinearly in stamp coordinates
                tex = scene.blob_texture[i]
                tc = np.clip(uu / (0.85 * sig) + tex_half, 0.0, tex_size - 1.001)
                tr = np.clip(vv / (0.85 * sig) + tex_half, 0.0, tex_size - 1.001)
                c0 = tc.astype(int)
                r0 = tr.astype(int)
                fc = tc - c0
                fr = tr - r0
                tval = (
                    tex[r0, c0] * (1 - fr) * (1 - fc)
                    + tex[r0 + 1, c0] * fr * (1 - fc)
                    + tex[r0, c0 + 1] * (1 - fr) * fc
                    + tex[r0 + 1, c0 + 1] * fr * fc
                )
                blob = gain * envelope * (0.35 + 0.9 * tval)
                blob += 0.55 * gain * np.exp(-r2 / (2.0 * (0.52 * sig) ** 2))
                img[cv0:cv1, cu0:cu1] += blob[:, :, None] * color_f[i][None, None, :]
        frames.append((np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8))
    return frames


def relative_essential(pose_a: CameraPose, pose_b: CameraPose) -> np.ndarray:
    """Essential matrix of the pair, unit Frobenius norm (normalized coords)."""
    r_rel = pose_b.rotation @ pose_a.rotation.T
    t_rel = pose_b.translation - r_rel @ pose_a.translation
    e = geo.skew(t_rel) @ r_rel
    return e / np.linalg.norm(e)


def compare_to_ground_truth(recon, scene: SynthScene, normalize: bool = False):
    """Best-fit similarity between a result and the generating scene.

    For reconstructions (anything with a ``poses`` dict keyed by frame
    index), camera centers are compared against the cameras that rendered
    those frames. For point clouds (anything with ``points``), index-aligned
    planted correspondences are used. Returns ``(transform, rmse)`` where the
    transform maps the result into scene coordinates; rmse is divided by the
    scene diameter when ``normalize`` is set.
    """
    if hasattr(recon, "poses"):
        indices = sorted(recon.poses.keys())
        if len(indices) < 4:
            raise TooFewEntities(f"only {len(indices)} registered cameras")
        if indices[-1] >= len(scene.cameras):
            raise BadParameters("reconstruction references a frame the scene lacks")
        src = np.array([recon.poses[i].center for i in indices])
        dst = np.array([scene.cameras[i][0].center for i in indices])
    elif hasattr(recon, "points"):
        src = np.asarray(recon.points, dtype=float)
        if len(src) != len(scene.points):
            raise BadParameters(
                "cloud comparison needs index-aligned points (planted correspondences)"
            )
        if len(src) < 4:
            raise TooFewEntities(f"only {len(src)} points")
        dst = scene.points
    else:
        raise BadParameters("expected a reconstruction or a point cloud")

    transform = geo.estimate_similarity(src, dst, with_scale=True)
    aligned = geo.apply_transform(transform, src)
    rmse = float(np.sqrt(np.mean(np.sum((aligned - dst) ** 2, axis=1))))
    if normalize:
        rmse /= scene.diameter
    return transform, rmse
