import math

import numpy as np
import pytest

from scenerecon import geometry as geo
from scenerecon.errors import (
    BadParameters,
    BehindCamera,
    DegenerateBaseline,
    NonPositiveDepth,
)
from scenerecon.rng import SplitMix64


def simple_camera(fx=100.0, fy=100.0, cx=0.0, cy=0.0, k1=0.0, k2=0.0):
    return geo.CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, k1=k1, k2=k2)


class TestProject:
    def test_on_optical_axis(self):
        px = geo.project((0, 0, 10), geo.CameraPose.identity(), simple_camera())
        assert np.allclose(px, (0, 0))

    def test_off_axis(self):
        px = geo.project((1, 0, 10), geo.CameraPose.identity(), simple_camera())
        assert np.allclose(px, (10, 0))

    def test_behind_camera(self):
        with pytest.raises(NonPositiveDepth):
            geo.project((0, 0, -1), geo.CameraPose.identity(), simple_camera())

    def test_distortion_grows_radius(self):
        k = simple_camera(k1=0.1)
        px = geo.project((1, 0, 2), geo.CameraPose.identity(), k)
        # r^2 = 0.25 -> factor 1.025
        assert np.allclose(px, (100 * 0.5 * 1.025, 0))

    def test_posed_projection(self):
        rng = SplitMix64(7)
        k = simple_camera(fx=500, fy=480, cx=320, cy=240)
        for _ in range(20):
            r = geo.random_rotation(rng, 0.5)
            pose = geo.CameraPose(r, np.array([rng.uniform(-1, 1) for _ in range(3)]))
            pt = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(4, 9)])
            pc = pose.transform(pt)
            if pc[2] <= 0:
                continue
            expected = (
                k.fx * pc[0] / pc[2] + k.cx,
                k.fy * pc[1] / pc[2] + k.cy,
            )
            assert np.allclose(geo.project(pt, pose, k), expected, atol=1e-12)


class TestUndistort:
    def test_roundtrip_moderate_distortion(self):
        k = simple_camera(fx=500, fy=500, cx=320, cy=240, k1=0.15, k2=0.02)
        pose = geo.CameraPose.identity()
        for pt in [(0.2, 0.1, 2.0), (-0.4, 0.3, 3.0), (0.0, 0.0, 1.0)]:
            distorted = geo.project(pt, pose, k)
            ideal = geo.undistort_pixel(distorted, k)
            k0 = simple_camera(fx=500, fy=500, cx=320, cy=240)
            expected = geo.project(pt, pose, k0)
            assert np.linalg.norm(ideal - expected) < 5e-3

    def test_backprojection_reproduces_direction(self):
        # projection then back-projection along the ray, k1=k2=0
        k = simple_camera(fx=420, fy=380, cx=11, cy=-3)
        pt = np.array([0.3, -0.2, 4.0])
        px = geo.project(pt, geo.CameraPose.identity(), k)
        d = geo.backproject_direction(geo.undistort_pixel(px, k), k)
        assert np.linalg.norm(np.cross(d, pt / np.linalg.norm(pt))) < 1e-9


class TestTriangulate:
    def test_exact_recovery(self):
        k = simple_camera()
        pose_a = geo.CameraPose.identity()
        pose_b = geo.CameraPose(np.eye(3), np.array([-1.0, 0.0, 0.0]))
        pt = np.array([0.5, 0.0, 5.0])
        obs_a = geo.project(pt, pose_a, k)
        obs_b = geo.project(pt, pose_b, k)
        rec = geo.triangulate(obs_a, obs_b, pose_a, pose_b, k)
        assert np.linalg.norm(rec - pt) < 1e-9

    def test_degenerate_baseline(self):
        k = simple_camera()
        pose = geo.CameraPose.identity()
        with pytest.raises(DegenerateBaseline):
            geo.triangulate((0, 0), (0, 0), pose, pose.copy(), k)

    def test_behind_camera(self):
        k = simple_camera()
        pose_a = geo.CameraPose.identity()
        pose_b = geo.CameraPose(np.eye(3), np.array([-1.0, 0.0, 0.0]))
        pt = np.array([0.5, 0.0, 5.0])
        obs_a = geo.project(pt, pose_a, k)
        obs_b = geo.project(pt, pose_b, k)
        # crossed observations triangulate behind the cameras
        with pytest.raises((BehindCamera, DegenerateBaseline)):
            geo.triangulate(obs_b, obs_a, pose_a, pose_b, k)

    def test_seeded_sweep_exact(self):
        # non-degenerate random two-camera configurations recover the point
        rng = SplitMix64(123)
        k = simple_camera(fx=500, fy=500, cx=320, cy=240)
        count = 0
        while count < 100:
            pose_a = geo.CameraPose(
                geo.random_rotation(rng, 0.3),
                np.array([rng.uniform(-0.5, 0.5) for _ in range(3)]),
            )
            pose_b = geo.CameraPose(
                geo.random_rotation(rng, 0.3),
                np.array([rng.uniform(-0.5, 0.5) for _ in range(3)]),
            )
            if np.linalg.norm(pose_a.center - pose_b.center) < 0.1:
                continue
            pt = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(4, 9)])
            try:
                obs_a = geo.project(pt, pose_a, k)
                obs_b = geo.project(pt, pose_b, k)
            except NonPositiveDepth:
                continue
            rec = geo.triangulate(obs_a, obs_b, pose_a, pose_b, k)
            assert np.linalg.norm(rec - pt) < 1e-9
            count += 1

    def test_monte_carlo_noise(self):
        # 0.5 px noise, baseline 1, depth 5, fx=500: depth within 5% in >=95%
        rng = SplitMix64(99)
        k = simple_camera(fx=500, fy=500)
        pose_a = geo.CameraPose.identity()
        pose_b = geo.CameraPose(np.eye(3), np.array([-1.0, 0.0, 0.0]))
        pt = np.array([0.0, 0.0, 5.0])
        obs_a0 = geo.project(pt, pose_a, k)
        obs_b0 = geo.project(pt, pose_b, k)
        good = 0
        for _ in range(1000):
            na = np.array([rng.normal(0, 0.5), rng.normal(0, 0.5)])
            nb = np.array([rng.normal(0, 0.5), rng.normal(0, 0.5)])
            rec = geo.triangulate(obs_a0 + na, obs_b0 + nb, pose_a, pose_b, k)
            if abs(rec[2] - 5.0) / 5.0 < 0.05:
                good += 1
        assert good >= 950

    def test_multiview(self):
        k = simple_camera(fx=400, fy=400)
        poses = [
            geo.CameraPose.identity(),
            geo.CameraPose(np.eye(3), np.array([-1.0, 0.0, 0.0])),
            geo.CameraPose(geo.rodrigues([0, 0.1, 0]), np.array([0.0, -1.0, 0.2])),
        ]
        pt = np.array([0.3, -0.2, 6.0])
        obs = [geo.project(pt, p, k) for p in poses]
        rec = geo.triangulate_multiview(obs, poses, k)
        assert np.linalg.norm(rec - pt) < 1e-9


class TestSimilarityTransform:
    def test_identity_compose(self):
        t = geo.compose(geo.SimilarityTransform.identity(), geo.SimilarityTransform.identity())
        assert np.allclose(t.matrix, np.eye(4))

    def test_scale_translation(self):
        t = geo.SimilarityTransform(2.0, np.eye(3), np.array([1.0, 0, 0]))
        assert np.allclose(geo.apply_transform(t, (0, 0, 0)), (1, 0, 0))
        assert np.allclose(geo.apply_transform(t, (1, 0, 0)), (3, 0, 0))

    def test_round_trip_property(self):
        rng = SplitMix64(5)
        for _ in range(100):
            t = geo.SimilarityTransform(
                math.exp(rng.uniform(-1, 1)),
                geo.random_rotation(rng),
                np.array([rng.uniform(-5, 5) for _ in range(3)]),
            )
            p = np.array([rng.uniform(-5, 5) for _ in range(3)])
            assert np.linalg.norm(geo.apply_transform(geo.invert(t), geo.apply_transform(t, p)) - p) < 1e-9

    def test_compose_property(self):
        rng = SplitMix64(6)
        for _ in range(100):
            t1 = geo.SimilarityTransform(
                math.exp(rng.uniform(-1, 1)), geo.random_rotation(rng),
                np.array([rng.uniform(-2, 2) for _ in range(3)]))
            t2 = geo.SimilarityTransform(
                math.exp(rng.uniform(-1, 1)), geo.random_rotation(rng),
                np.array([rng.uniform(-2, 2) for _ in range(3)]))
            p = np.array([rng.uniform(-3, 3) for _ in range(3)])
            lhs = geo.apply_transform(geo.compose(t1, t2), p)
            rhs = geo.apply_transform(t1, geo.apply_transform(t2, p))
            assert np.linalg.norm(lhs - rhs) < 1e-9

    def test_associativity(self):
        rng = SplitMix64(8)
        mk = lambda: geo.SimilarityTransform(
            math.exp(rng.uniform(-0.5, 0.5)), geo.random_rotation(rng),
            np.array([rng.uniform(-1, 1) for _ in range(3)]))
        for _ in range(25):
            a, b, c = mk(), mk(), mk()
            m1 = geo.compose(geo.compose(a, b), c).matrix
            m2 = geo.compose(a, geo.compose(b, c)).matrix
            assert np.max(np.abs(m1 - m2)) < 1e-9

    def test_matrix_round_trip(self):
        t = geo.SimilarityTransform(1.7, geo.rodrigues([0.1, -0.2, 0.3]), np.array([4.0, 5.0, 6.0]))
        t2 = geo.SimilarityTransform.from_matrix(t.matrix)
        assert abs(t.scale - t2.scale) < 1e-12
        assert np.allclose(t.rotation, t2.rotation, atol=1e-12)
        assert np.allclose(t.translation, t2.translation)

    def test_invalid_scale(self):
        with pytest.raises(BadParameters):
            geo.SimilarityTransform(-1.0, np.eye(3), np.zeros(3))


class TestRotationHelpers:
    def test_rodrigues_round_trip(self):
        rng = SplitMix64(11)
        for _ in range(100):
            w = np.array([rng.uniform(-1, 1) for _ in range(3)]) * rng.uniform(0, 3)
            if np.linalg.norm(w) >= math.pi:
                continue
            r = geo.rodrigues(w)
            assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12
            assert np.linalg.norm(geo.rotation_to_angle_axis(r) - w) < 1e-9

    def test_right_jacobian_matches_fd(self):
        rng = SplitMix64(13)
        h = 1e-7
        for _ in range(20):
            w = np.array([rng.uniform(-1, 1) for _ in range(3)])
            p = np.array([rng.uniform(-1, 1) for _ in range(3)])
            jr = geo.so3_right_jacobian(w)
            # d(R(w)p)/dw = -R(w) [p]x Jr(w)
            analytic = -geo.rodrigues(w) @ geo.skew(p) @ jr
            fd = np.zeros((3, 3))
            for i in range(3):
                dw = np.zeros(3)
                dw[i] = h
                fd[:, i] = (geo.rodrigues(w + dw) @ p - geo.rodrigues(w - dw) @ p) / (2 * h)
            assert np.max(np.abs(analytic - fd)) < 1e-6

    def test_quaternion_round_trip(self):
        rng = SplitMix64(17)
        for _ in range(50):
            r = geo.random_rotation(rng)
            q = geo.rotation_to_quaternion(r)
            assert np.max(np.abs(geo.quaternion_to_rotation(q) - r)) < 1e-12

    def test_pose_validation(self):
        with pytest.raises(BadParameters):
            geo.CameraPose(np.eye(3) * 2.0, np.zeros(3))
