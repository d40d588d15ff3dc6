"""Spherical conversion, range-based densification, and rigid motion compensation.

Conventions: range r = sqrt(x^2 + y^2 + z^2), elevation theta = asin(z / r) in
[-pi/2, pi/2], azimuth phi = atan2(y, x) in (-pi, pi]. The Cartesian
reconstruction is the exact inverse (x = r cos(theta) cos(phi),
y = r cos(theta) sin(phi), z = r sin(theta)), so growing the range by zero is
the identity.

All functions are pure and safe for data-parallel use over point ranges.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import OriginPointError
from .pointcloud_io import PointCloud, Pose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SphericalCoords:
    """Columnar spherical coordinates: r (m), theta/phi (rad)."""

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.r, dtype=np.float64)
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        if not (r.shape == theta.shape == phi.shape) or r.ndim != 1:
            raise ValueError("r, theta, phi must be equal-length 1-D arrays")
        if np.any(r < 0.0):
            raise ValueError("range must be non-negative")
        # Tiny slack for values that round just past the closed bounds.
        if np.any(np.abs(theta) > np.pi / 2 + 1e-12):
            raise ValueError("elevation outside [-pi/2, pi/2]")
        if np.any(phi > np.pi + 1e-12) or np.any(phi <= -np.pi - 1e-12):
            raise ValueError("azimuth outside (-pi, pi]")
        for name, col in (("r", r), ("theta", theta), ("phi", phi)):
            col.flags.writeable = False
            object.__setattr__(self, name, col)

    @property
    def count(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True)
class DensifyConfig:
    """Range-growth sampling parameters.

    Each source point spawns ``copies_per_point`` extra points at range
    r + dr with dr drawn uniformly from [delta_r_min, delta_r_max]; draws
    come from a counter-based generator keyed on ``seed`` so the output is
    reproducible point by point.
    """

    delta_r_min: float = 0.1
    delta_r_max: float = 0.3
    copies_per_point: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.delta_r_min <= self.delta_r_max):
            raise ValueError("need 0 <= delta_r_min <= delta_r_max")
        if self.copies_per_point < 1:
            raise ValueError("copies_per_point must be >= 1")


def to_spherical(cloud: PointCloud) -> SphericalCoords:
    """Convert every point to (r, theta, phi).

    Raises OriginPointError if any point sits at the origin, where the
    angles are undefined.
    """
    r = np.sqrt(cloud.x * cloud.x + cloud.y * cloud.y + cloud.z * cloud.z)
    if np.any(r == 0.0):
        raise OriginPointError("cloud contains points at the origin")
    theta = np.arcsin(cloud.z / r)
    phi = np.arctan2(cloud.y, cloud.x)
    # atan2 can return -pi for (y = -0.0, x < 0); fold onto the (-pi, pi] branch.
    phi = np.where(phi == -np.pi, np.pi, phi)
    return SphericalCoords(r, theta, phi)


def from_spherical(sph: SphericalCoords) -> np.ndarray:
    """Reconstruct Cartesian coordinates as an (n, 3) float64 array."""
    cos_t = np.cos(sph.theta)
    x = sph.r * cos_t * np.cos(sph.phi)
    y = sph.r * cos_t * np.sin(sph.phi)
    z = sph.r * np.sin(sph.theta)
    return np.stack([x, y, z], axis=1)


def densify(cloud: PointCloud, cfg: DensifyConfig) -> PointCloud:
    """Append range-grown copies of every point.

    The copy of a point at range r is placed at range r + dr on the same ray,
    so theta and phi are untouched; implemented as pure radial scaling by
    (r + dr) / r, which makes dr = 0 the bitwise identity. Origin points
    cannot be grown and are skipped with a logged count. Output order is the
    original points followed by copy pass 0, pass 1, ... each in source order.
    """
    r = np.sqrt(cloud.x * cloud.x + cloud.y * cloud.y + cloud.z * cloud.z)
    keep = r != 0.0
    n_skipped = int(cloud.count - np.count_nonzero(keep))
    if n_skipped:
        logger.warning("densify: skipped %d origin points", n_skipped)
    idx = np.flatnonzero(keep)
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    deltas = rng.uniform(cfg.delta_r_min, cfg.delta_r_max,
                         size=(cfg.copies_per_point, idx.size))
    scale = (r[idx] + deltas) / r[idx]  # (copies, m)
    new_x = (cloud.x[idx] * scale).ravel()
    new_y = (cloud.y[idx] * scale).ravel()
    new_z = (cloud.z[idx] * scale).ravel()
    new_i = np.tile(cloud.intensity[idx], cfg.copies_per_point)
    return PointCloud(
        np.concatenate([cloud.x, new_x]),
        np.concatenate([cloud.y, new_y]),
        np.concatenate([cloud.z, new_z]),
        np.concatenate([cloud.intensity, new_i]),
    )


def motion_compensate(past: PointCloud, pose_past: Pose, pose_current: Pose) -> PointCloud:
    """Express a past frame in the current frame: p' = T_current^-1 T_past p."""
    rel = pose_current.inverse().compose(pose_past)
    pts = rel.apply(past.xyz())
    return PointCloud(pts[:, 0], pts[:, 1], pts[:, 2], past.intensity)
