"""Readers and writers for KITTI-style point clouds, labels, and ego poses.

File formats:
  - cloud ``.bin``: consecutive little-endian float32 quadruples (x, y, z, intensity)
  - label ``.label``: one little-endian uint32 per point, low 16 bits semantic
    class, high 16 bits instance id
  - poses: text, 12 whitespace-separated floats per line, row-major 3x4 ``[R | t]``

All container types are immutable after construction and safe to share across
threads; the readers are pure functions and may run concurrently on distinct
files.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatchError,
    MalformedLineError,
    NonFiniteValueError,
    NonOrthonormalRotationError,
    TruncatedFileError,
)

logger = logging.getLogger(__name__)

POINT_RECORD_BYTES = 16  # 4 x float32
LABEL_RECORD_BYTES = 4   # 1 x uint32
ORTHONORMALITY_TOL = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PointCloud:
    """Columnar (structure-of-arrays) point cloud.

    Coordinates are meters, intensity is unitless reflectance in [0, 1].
    Columns are stored as read-only float64 arrays so downstream geometry
    kernels can stream one coordinate at a time at full precision; the disk
    format stays float32.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        cols = {}
        n = None
        for name in ("x", "y", "z", "intensity"):
            col = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if col.ndim != 1:
                raise ValueError(f"column {name!r} must be 1-D")
            if n is None:
                n = col.shape[0]
            elif col.shape[0] != n:
                raise CountMismatchError(
                    f"column {name!r} has length {col.shape[0]}, expected {n}"
                )
            if not np.isfinite(col).all():
                raise NonFiniteValueError(f"column {name!r} contains NaN/Inf")
            cols[name] = _freeze(col)
        for name, col in cols.items():
            object.__setattr__(self, name, col)

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def xyz(self) -> np.ndarray:
        """Points as an (n, 3) float64 array (copy)."""
        return np.stack([self.x, self.y, self.z], axis=1)

    @classmethod
    def from_columns(cls, x, y, z, intensity) -> "PointCloud":
        return cls(np.asarray(x), np.asarray(y), np.asarray(z), np.asarray(intensity))

    @classmethod
    def empty(cls) -> "PointCloud":
        zero = np.zeros(0)
        return cls(zero, zero.copy(), zero.copy(), zero.copy())


@dataclass(frozen=True)
class PointLabels:
    """Per-point semantic class and instance ids (SemanticKITTI convention)."""

    semantic_class: np.ndarray  # uint16
    instance_id: np.ndarray     # uint16

    def __post_init__(self):
        sem = np.ascontiguousarray(self.semantic_class, dtype=np.uint16)
        inst = np.ascontiguousarray(self.instance_id, dtype=np.uint16)
        if sem.shape != inst.shape or sem.ndim != 1:
            raise CountMismatchError("semantic_class and instance_id must be equal-length 1-D")
        object.__setattr__(self, "semantic_class", _freeze(sem))
        object.__setattr__(self, "instance_id", _freeze(inst))

    @property
    def count(self) -> int:
        return self.semantic_class.shape[0]


@dataclass(frozen=True)
class Pose:
    """Rigid transform: 3x3 orthonormal rotation plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.ascontiguousarray(self.rotation, dtype=np.float64)
        trans = np.ascontiguousarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise ValueError("rotation must be (3, 3) and translation (3,)")
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > ORTHONORMALITY_TOL:
            raise NonOrthonormalRotationError(f"R^T R deviates from I by {err:.3e}")
        det = np.linalg.det(rot)
        if abs(det - 1.0) > ORTHONORMALITY_TOL:
            raise NonOrthonormalRotationError(f"det(R) = {det:.9f}, expected 1")
        object.__setattr__(self, "rotation", _freeze(rot))
        object.__setattr__(self, "translation", _freeze(trans))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self ∘ other)(p) = self(other(p))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array of points."""
        return points @ self.rotation.T + self.translation


def read_cloud(path) -> PointCloud:
    """Read a KITTI ``.bin`` point cloud.

    Raises TruncatedFileError when the byte length is not a multiple of 16
    and NonFiniteValueError when the payload contains NaN/Inf. Intensities
    outside [0, 1] are clamped with a logged count rather than rejected;
    real captures contain slight overshoot.
    """
    path = Path(path)
    size = os.path.getsize(path)
    if size % POINT_RECORD_BYTES != 0:
        raise TruncatedFileError(
            f"{path}: {size} bytes is not a multiple of {POINT_RECORD_BYTES}"
        )
    raw = np.fromfile(path, dtype="<f4").reshape(-1, 4)
    if not np.isfinite(raw).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN/Inf")
    inten = raw[:, 3]
    n_clamped = int(np.count_nonzero((inten < 0.0) | (inten > 1.0)))
    if n_clamped:
        logger.warning("%s: clamped %d intensity values into [0, 1]", path, n_clamped)
        inten = np.clip(inten, 0.0, 1.0)
    return PointCloud(raw[:, 0], raw[:, 1], raw[:, 2], inten)


def write_cloud(cloud: PointCloud, path) -> None:
    """Write a point cloud in the ``.bin`` format (float32 quadruples)."""
    out = np.empty((cloud.count, 4), dtype="<f4")
    out[:, 0] = cloud.x
    out[:, 1] = cloud.y
    out[:, 2] = cloud.z
    out[:, 3] = cloud.intensity
    out.tofile(path)


def read_labels(path, expected_count: int | None = None) -> PointLabels:
    """Read a ``.label`` file; checks the word count against ``expected_count``."""
    path = Path(path)
    size = os.path.getsize(path)
    if size % LABEL_RECORD_BYTES != 0:
        raise TruncatedFileError(
            f"{path}: {size} bytes is not a multiple of {LABEL_RECORD_BYTES}"
        )
    words = np.fromfile(path, dtype="<u4")
    if expected_count is not None and words.shape[0] != expected_count:
        raise CountMismatchError(
            f"{path}: {words.shape[0]} labels, expected {expected_count}"
        )
    semantic = (words & 0xFFFF).astype(np.uint16)
    instance = (words >> 16).astype(np.uint16)
    return PointLabels(semantic, instance)


def write_labels(labels: PointLabels, path) -> None:
    words = (labels.instance_id.astype("<u4") << 16) | labels.semantic_class.astype("<u4")
    words.astype("<u4").tofile(path)


def read_poses(path, calibration: Pose | None = None) -> list[Pose]:
    """Read a pose file (12 floats per line, row-major 3x4).

    Without a calibration the poses are interpreted as LiDAR-frame poses.
    When ``calibration`` (sensor-to-reference transform) is given, each pose
    T is rebased into the sensor frame as calib^-1 ∘ T ∘ calib.
    """
    poses = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 12:
                raise MalformedLineError(
                    f"{path}:{lineno}: expected 12 fields, got {len(fields)}"
                )
            try:
                vals = np.array([float(f) for f in fields], dtype=np.float64)
            except ValueError as exc:
                raise MalformedLineError(f"{path}:{lineno}: {exc}") from exc
            mat = vals.reshape(3, 4)
            try:
                pose = Pose(mat[:, :3], mat[:, 3])
            except NonOrthonormalRotationError as exc:
                raise NonOrthonormalRotationError(f"{path}:{lineno}: {exc}") from exc
            if calibration is not None:
                pose = calibration.inverse().compose(pose).compose(calibration)
            poses.append(pose)
    return poses
