"""Camera model, rigid/similarity transforms, projection and triangulation.

Conventions used throughout the package:

* camera pose maps world to camera coordinates, ``X_cam = R @ X_world + t``
* rotations are stored as 3x3 orthonormal matrices at rest and
  parameterized as angle-axis 3-vectors inside optimizers
* pixel observations are ``(u, v)`` with ``u`` along image columns
* radial distortion uses two coefficients, ``(1 + k1*r^2 + k2*r^4)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParameters,
    BehindCamera,
    DegenerateBaseline,
    NonPositiveDepth,
)

_ORTHO_TOL = 1e-9
_MIN_DEPTH = 1e-12


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise BadParameters("3-vector has non-finite coordinates")
    return v


def _check_rotation(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float).reshape(3, 3)
    if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-6:
        raise BadParameters("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > 1e-6:
        raise BadParameters("rotation has det != +1")
    return r


@dataclass
class CameraIntrinsics:
    """Pinhole intrinsics with two radial distortion coefficients."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise BadParameters("focal lengths must be positive")
        if not all(math.isfinite(v) for v in (self.k1, self.k2)):
            raise BadParameters("distortion coefficients must be finite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass
class CameraPose:
    """World-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = _check_rotation(self.rotation)
        self.translation = _as_vec3(self.translation)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def transform(self, points: np.ndarray) -> np.ndarray:
        """World points (N,3) or (3,) into the camera frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def copy(self) -> "CameraPose":
        return CameraPose(self.rotation.copy(), self.translation.copy())


@dataclass
class SimilarityTransform:
    """p -> scale * rotation @ p + translation."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise BadParameters("scale must be positive and finite")
        self.scale = float(self.scale)
        self.rotation = _check_rotation(self.rotation)
        self.translation = _as_vec3(self.translation)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls()

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.scale * self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "SimilarityTransform":
        m = np.asarray(m, dtype=float).reshape(4, 4)
        a = m[:3, :3]
        scale = float(np.cbrt(np.linalg.det(a)))
        return cls(scale, a / scale, m[:3, 3])


def apply_transform(t: SimilarityTransform, points: np.ndarray) -> np.ndarray:
    """Apply a similarity transform to a point (3,) or point array (N,3)."""
    p = np.asarray(points, dtype=float)
    return t.scale * (p @ t.rotation.T) + t.translation


def compose(t1: SimilarityTransform, t2: SimilarityTransform) -> SimilarityTransform:
    """Composition such that apply(compose(t1,t2), p) == apply(t1, apply(t2, p))."""
    return SimilarityTransform(
        t1.scale * t2.scale,
        t1.rotation @ t2.rotation,
        t1.scale * (t1.rotation @ t2.translation) + t1.translation,
    )


def invert(t: SimilarityTransform) -> SimilarityTransform:
    inv_scale = 1.0 / t.scale
    rot = t.rotation.T
    return SimilarityTransform(inv_scale, rot, -inv_scale * (rot @ t.translation))


# ---------------------------------------------------------------------------
# rotation parameterization


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(omega: np.ndarray) -> np.ndarray:
    """Angle-axis 3-vector to rotation matrix."""
    omega = np.asarray(omega, dtype=float).reshape(3)
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        return np.eye(3) + skew(omega)
    k = omega / theta
    kx = skew(k)
    return np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)


def rotation_to_angle_axis(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to angle-axis 3-vector (angle in [0, pi])."""
    r = np.asarray(r, dtype=float)
    cos_theta = max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0))
    theta = math.acos(cos_theta)
    if theta < 1e-12:
        # first order: R ~ I + [w]x
        return np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / 2.0
    if theta > math.pi - 1e-6:
        # near pi the off-diagonal formula degenerates; use the symmetric part
        a = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(a), 0.0))
        # fix signs from the largest component
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = a[:, i] / axis[i]
        axis = axis / np.linalg.norm(axis)
        return theta * axis
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return theta * axis / (2.0 * math.sin(theta))


def so3_right_jacobian(omega: np.ndarray) -> np.ndarray:
    """Right Jacobian of SO(3): d exp(w + dw) = exp(w) exp(Jr(w) dw)."""
    omega = np.asarray(omega, dtype=float).reshape(3)
    theta = np.linalg.norm(omega)
    wx = skew(omega)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * wx + (wx @ wx) / 6.0
    t2 = theta * theta
    a = (1.0 - math.cos(theta)) / t2
    b = (theta - math.sin(theta)) / (t2 * theta)
    return np.eye(3) - a * wx + b * (wx @ wx)


def rotation_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    r = np.asarray(r, dtype=float)
    tr = np.trace(r)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng, max_angle: float = math.pi) -> np.ndarray:
    """Uniform random axis, uniform angle in [0, max_angle)."""
    while True:
        v = np.array([rng.normal(), rng.normal(), rng.normal()])
        n = np.linalg.norm(v)
        if n > 1e-9:
            break
    return rodrigues(v / n * rng.uniform(0.0, max_angle))


# ---------------------------------------------------------------------------
# projection model


def distort_normalized(xn: float, yn: float, k: CameraIntrinsics) -> tuple[float, float]:
    r2 = xn * xn + yn * yn
    d = 1.0 + k.k1 * r2 + k.k2 * r2 * r2
    return xn * d, yn * d


def project(point, pose: CameraPose, k: CameraIntrinsics) -> np.ndarray:
    """Project a world point to distorted pixel coordinates.

    Raises NonPositiveDepth when the point does not lie strictly in front
    of the camera.
    """
    pc = pose.transform(_as_vec3(point))
    z = pc[2]
    if z <= _MIN_DEPTH:
        raise NonPositiveDepth(f"depth {z:.3e} <= {_MIN_DEPTH:.0e}")
    xd, yd = distort_normalized(pc[0] / z, pc[1] / z, k)
    return np.array([k.fx * xd + k.cx, k.fy * yd + k.cy])


def project_many(points: np.ndarray, pose: CameraPose, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N,3) points.

    Returns (pixels (N,2), depths (N,)); callers decide how to treat
    non-positive depths.
    """
    pc = pose.transform(np.asarray(points, dtype=float).reshape(-1, 3))
    z = pc[:, 2]
    safe = np.where(np.abs(z) < _MIN_DEPTH, _MIN_DEPTH, z)
    xn = pc[:, 0] / safe
    yn = pc[:, 1] / safe
    r2 = xn * xn + yn * yn
    d = 1.0 + k.k1 * r2 + k.k2 * r2 * r2
    px = np.stack([k.fx * xn * d + k.cx, k.fy * yn * d + k.cy], axis=1)
    return px, z


def undistort_pixel(pixel, k: CameraIntrinsics, iterations: int = 5) -> np.ndarray:
    """Remove radial distortion, returning ideal pinhole pixel coordinates.

    Fixed-point iteration of the inverse mapping; adequate for |k1| <= 0.2.
    """
    u, v = np.asarray(pixel, dtype=float).reshape(2)
    xd = (u - k.cx) / k.fx
    yd = (v - k.cy) / k.fy
    x, y = xd, yd
    for _ in range(iterations):
        r2 = x * x + y * y
        d = 1.0 + k.k1 * r2 + k.k2 * r2 * r2
        x = xd / d
        y = yd / d
    return np.array([k.fx * x + k.cx, k.fy * y + k.cy])


def backproject_direction(pixel, k: CameraIntrinsics) -> np.ndarray:
    """Unit ray direction in the camera frame for an undistorted pixel."""
    u, v = np.asarray(pixel, dtype=float).reshape(2)
    d = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
    return d / np.linalg.norm(d)


# ---------------------------------------------------------------------------
# two-view triangulation


def _projection_matrix(pose: CameraPose, k: CameraIntrinsics) -> np.ndarray:
    return k.matrix @ np.hstack([pose.rotation, pose.translation[:, None]])


def triangulate(
    obs_a,
    obs_b,
    pose_a: CameraPose,
    pose_b: CameraPose,
    k: CameraIntrinsics,
) -> np.ndarray:
    """Two-view triangulation: linear DLT plus one Gauss-Newton step.

    Observations must be undistorted pixel coordinates. Raises
    DegenerateBaseline for coincident camera centers and BehindCamera when
    the triangulated point has non-positive depth in either view.
    """
    if np.linalg.norm(pose_a.center - pose_b.center) < 1e-9:
        raise DegenerateBaseline("camera centers coincide")
    pa = _projection_matrix(pose_a, k)
    pb = _projection_matrix(pose_b, k)
    ua, va = np.asarray(obs_a, dtype=float).reshape(2)
    ub, vb = np.asarray(obs_b, dtype=float).reshape(2)
    a = np.vstack(
        [
            ua * pa[2] - pa[0],
            va * pa[2] - pa[1],
            ub * pb[2] - pb[0],
            vb * pb[2] - pb[1],
        ]
    )
    _, _, vt = np.linalg.svd(a)
    hom = vt[-1]
    if abs(hom[3]) < 1e-15:
        raise DegenerateBaseline("point at infinity")
    point = hom[:3] / hom[3]

    point = _gauss_newton_point(point, (obs_a, obs_b), (pose_a, pose_b), k)

    for pose in (pose_a, pose_b):
        if pose.transform(point)[2] <= 0:
            raise BehindCamera("triangulated point behind a camera")
    return point


def _gauss_newton_point(point, observations, poses, k: CameraIntrinsics, steps: int = 1):
    """Refine a 3D point by Gauss-Newton on pixel reprojection error."""
    p = np.asarray(point, dtype=float).copy()
    for _ in range(steps):
        jtj = np.zeros((3, 3))
        jtr = np.zeros(3)
        for obs, pose in zip(observations, poses):
            pc = pose.transform(p)
            z = pc[2]
            if z <= _MIN_DEPTH:
                return p
            xn, yn = pc[0] / z, pc[1] / z
            r2 = xn * xn + yn * yn
            d = 1.0 + k.k1 * r2 + k.k2 * r2 * r2
            dd_dr2 = k.k1 + 2.0 * k.k2 * r2
            res = np.array(
                [k.fx * xn * d + k.cx, k.fy * yn * d + k.cy]
            ) - np.asarray(obs, dtype=float)
            # d(xn,yn)/d(pc)
            dn = np.array([[1.0 / z, 0.0, -xn / z], [0.0, 1.0 / z, -yn / z]])
            dr2 = 2.0 * np.array([xn, yn]) @ dn
            ddist = np.vstack(
                [
                    k.fx * (d * dn[0] + xn * dd_dr2 * dr2),
                    k.fy * (d * dn[1] + yn * dd_dr2 * dr2),
                ]
            )
            j = ddist @ pose.rotation
            jtj += j.T @ j
            jtr += j.T @ res
        try:
            delta = np.linalg.solve(jtj, -jtr)
        except np.linalg.LinAlgError:
            return p
        p = p + delta
    return p


def triangulate_multiview(observations, poses, k: CameraIntrinsics) -> np.ndarray:
    """DLT over >=2 views plus one Gauss-Newton step.

    Raises BehindCamera when the solution has non-positive depth anywhere.
    """
    if len(observations) < 2:
        raise BadParameters("need at least two observations")
    rows = []
    for obs, pose in zip(observations, poses):
        pm = _projection_matrix(pose, k)
        u, v = np.asarray(obs, dtype=float).reshape(2)
        rows.append(u * pm[2] - pm[0])
        rows.append(v * pm[2] - pm[1])
    a = np.vstack(rows)
    _, _, vt = np.linalg.svd(a)
    hom = vt[-1]
    if abs(hom[3]) < 1e-15:
        raise BehindCamera("point at infinity")
    point = _gauss_newton_point(hom[:3] / hom[3], observations, poses, k)
    for pose in poses:
        if pose.transform(point)[2] <= 0:
            raise BehindCamera("triangulated point behind a camera")
    return point


def reprojection_error(point, obs, pose: CameraPose, k: CameraIntrinsics) -> float:
    """Pixel distance between an observation and the point's projection."""
    return float(np.linalg.norm(project(point, pose, k) - np.asarray(obs, dtype=float)))


def estimate_similarity(src: np.ndarray, dst: np.ndarray, with_scale: bool = True) -> SimilarityTransform:
    """Closed-form least-squares similarity (Umeyama) mapping src onto dst.

    Uses the centroid/SVD construction with the determinant sign fix, so the
    returned rotation is always proper. ``with_scale=False`` gives the rigid
    (scale 1) solution.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape or len(src) < 3:
        raise BadParameters("need matching point sets with >= 3 points")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    ds = src - mu_s
    dd = dst - mu_d
    cov = dd.T @ ds / len(src)
    u, svals, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1.0
    rot = u @ s_fix @ vt
    if with_scale:
        var_s = float(np.mean(np.sum(ds * ds, axis=1)))
        if var_s < 1e-30:
            raise BadParameters("degenerate source points")
        scale = float((svals * np.diag(s_fix)).sum()) / var_s
    else:
        scale = 1.0
    if scale <= 0:
        raise BadParameters("estimated non-positive scale")
    return SimilarityTransform(scale, rot, mu_d - scale * (rot @ mu_s))
