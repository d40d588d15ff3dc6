import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import random_cloud
from lidarbev.errors import OriginPointError
from lidarbev.geometry import (
    DensifyConfig,
    SphericalCoords,
    densify,
    from_spherical,
    motion_compensate,
    to_spherical,
)
from lidarbev.pointcloud_io import PointCloud, Pose

# atan2(4, 3) evaluated with a 50-digit reference
PHI_3_4 = 0.9272952180016122


def _cloud(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return PointCloud(pts[:, 0], pts[:, 1], pts[:, 2], np.full(len(pts), 0.5))


def test_to_spherical_axis_point():
    sph = to_spherical(_cloud([(1.0, 0.0, 0.0)]))
    assert sph.r[0] == 1.0 and sph.theta[0] == 0.0 and sph.phi[0] == 0.0


def test_to_spherical_3_4_0():
    sph = to_spherical(_cloud([(3.0, 4.0, 0.0)]))
    assert sph.r[0] == 5.0
    assert sph.theta[0] == 0.0
    assert abs(sph.phi[0] - PHI_3_4) < 1e-12


def test_to_spherical_origin_rejected():
    with pytest.raises(OriginPointError):
        to_spherical(_cloud([(1.0, 0.0, 0.0), (0.0, 0.0, 0.0)]))


def test_from_spherical_axis_and_pole():
    out = from_spherical(SphericalCoords(np.array([1.0]), np.array([0.0]), np.array([0.0])))
    np.testing.assert_array_equal(out, [[1.0, 0.0, 0.0]])
    pole = from_spherical(SphericalCoords(np.array([2.0]), np.array([np.pi / 2]),
                                          np.array([1.234])))
    np.testing.assert_allclose(pole, [[0.0, 0.0, 2.0]], atol=1e-9)


def test_from_spherical_inverts_3_4_0():
    sph = SphericalCoords(np.array([5.0]), np.array([0.0]), np.array([PHI_3_4]))
    np.testing.assert_allclose(from_spherical(sph), [[3.0, 4.0, 0.0]], rtol=1e-9, atol=1e-9)


def test_round_trip_relative_error(rng):
    n = 2000
    r = rng.uniform(0.5, 80.0, n)
    theta = rng.uniform(-np.pi / 2, np.pi / 2, n)
    phi = rng.uniform(-np.pi, np.pi, n)
    xyz = from_spherical(SphericalCoords(r, theta, phi))
    cloud = PointCloud(xyz[:, 0], xyz[:, 1], xyz[:, 2], np.zeros(n))
    back = from_spherical(to_spherical(cloud))
    rel = np.abs(back - xyz) / np.maximum(np.abs(xyz), 1e-30)
    # Components near zero have large relative error by construction; gate
    # on the point-level error instead.
    err = np.linalg.norm(back - xyz, axis=1) / r
    assert err.max() < 1e-9
    assert np.median(rel) < 1e-12


def test_azimuth_branch_is_half_open(rng):
    cloud = _cloud([(-1.0, -0.0, 0.0)])  # atan2 would give -pi here
    sph = to_spherical(cloud)
    assert sph.phi[0] == np.pi


def test_densify_zero_delta_is_bitwise_identity(rng):
    cloud = random_cloud(rng, 500)
    out = densify(cloud, DensifyConfig(0.0, 0.0, copies_per_point=1, seed=7))
    assert out.count == 1000
    np.testing.assert_array_equal(out.x[500:], cloud.x)
    np.testing.assert_array_equal(out.y[500:], cloud.y)
    np.testing.assert_array_equal(out.z[500:], cloud.z)
    np.testing.assert_array_equal(out.intensity[500:], cloud.intensity)


def test_densify_fixed_delta_on_axis_point():
    out = densify(_cloud([(1.0, 0.0, 0.0)]), DensifyConfig(0.1, 0.1, 1, seed=0))
    assert out.count == 2
    assert abs(out.x[1] - 1.1) < 1e-15
    assert out.y[1] == 0.0 and out.z[1] == 0.0
    assert out.intensity[1] == out.intensity[0]


def test_densify_range_deltas_within_bounds(rng):
    cloud = random_cloud(rng, 1000, z_range=(-3.0, 3.0))
    cfg = DensifyConfig(0.1, 0.3, copies_per_point=2, seed=42)
    out = densify(cloud, cfg)
    r_old = np.sqrt(cloud.x**2 + cloud.y**2 + cloud.z**2)
    r_new = np.sqrt(out.x[1000:]**2 + out.y[1000:]**2 + out.z[1000:]**2)
    deltas = r_new - np.tile(r_old, 2)
    assert deltas.min() >= 0.1 - 1e-9
    assert deltas.max() <= 0.3 + 1e-9


def test_densify_preserves_angles(rng):
    cloud = random_cloud(rng, 400)
    out = densify(cloud, DensifyConfig(0.1, 0.3, 1, seed=3))
    sph_src = to_spherical(cloud)
    sph_all = to_spherical(out)
    np.testing.assert_allclose(sph_all.theta[400:], sph_src.theta, atol=1e-9)
    np.testing.assert_allclose(sph_all.phi[400:], sph_src.phi, atol=1e-9)


def test_densify_skips_origin_points_with_count(rng):
    pts = [(1.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 2.0, 0.0)]
    out = densify(_cloud(pts), DensifyConfig(0.1, 0.3, 2, seed=0))
    # 3 originals + 2 copies for each of the 2 non-origin points
    assert out.count == 3 + 2 * 2


def test_densify_deterministic_per_seed(rng):
    cloud = random_cloud(rng, 300)
    cfg = DensifyConfig(0.1, 0.3, 1, seed=11)
    a = densify(cloud, cfg)
    b = densify(cloud, cfg)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.z, b.z)
    c = densify(cloud, DensifyConfig(0.1, 0.3, 1, seed=12))
    assert not np.array_equal(a.x, c.x)


def _random_pose(rng):
    return Pose(Rotation.random(rng=rng).as_matrix(), rng.uniform(-10, 10, 3))


def test_motion_compensate_same_pose_is_identity(rng):
    cloud = random_cloud(rng, 200)
    pose = _random_pose(rng)
    out = motion_compensate(cloud, pose, pose)
    np.testing.assert_allclose(out.xyz(), cloud.xyz(), atol=1e-12)
    np.testing.assert_array_equal(out.intensity, cloud.intensity)


def test_motion_compensate_forward_translation_sign():
    cloud = _cloud([(10.0, 0.0, 0.0)])
    pose_past = Pose.identity()
    pose_current = Pose(np.eye(3), np.array([1.0, 0.0, 0.0]))  # ego moved 1 m forward
    out = motion_compensate(cloud, pose_past, pose_current)
    np.testing.assert_allclose(out.xyz(), [[9.0, 0.0, 0.0]], atol=1e-12)


def test_motion_compensate_round_trip(rng):
    cloud = random_cloud(rng, 300)
    pa, pb = _random_pose(rng), _random_pose(rng)
    there = motion_compensate(cloud, pa, pb)
    back = motion_compensate(there, pb, pa)
    np.testing.assert_allclose(back.xyz(), cloud.xyz(), atol=1e-9)


def test_motion_compensate_preserves_pairwise_distances(rng):
    cloud = random_cloud(rng, 100)
    out = motion_compensate(cloud, _random_pose(rng), _random_pose(rng))
    src, dst = cloud.xyz(), out.xyz()
    i = rng.integers(0, 100, 200)
    j = rng.integers(0, 100, 200)
    d_src = np.linalg.norm(src[i] - src[j], axis=1)
    d_dst = np.linalg.norm(dst[i] - dst[j], axis=1)
    np.testing.assert_allclose(d_dst, d_src, atol=1e-9)
