"""Bird's-eye-view rasterization of point clouds into dense feature grids.

A point (x, y, z) lands in cell (u, v) with u = floor((x - x_min) / r_x) and
v = floor((y - y_min) / r_y); points outside [0, H) x [0, W) are filtered.
Per-cell aggregates are configurable from {max_height, mean_intensity,
density, occupancy}. The default 60 m x 60 m extent at 0.125 m resolution
gives a 480 x 480 grid.

The hot path is a single-pass compiled kernel; mean accumulation runs in
float64 so results are order-stable to well below 1e-6, and the max /
occupancy / density channels are exact regardless of point order.
"""

from __future__ import annotations

import struct
from dataclasses import InitVar, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import ContainerFormatError, ShapeMismatchError, TruncatedFileError
from .pointcloud_io import PointCloud

CHANNEL_KINDS = ("max_height", "mean_intensity", "density", "occupancy")

BEVG_MAGIC = b"BEVG"
BEVG_HEADER = struct.Struct("<4sHHHHI")  # magic, H, W, C, dtype tag, reserved
DTYPE_TAGS = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


@dataclass(frozen=True)
class BevConfig:
    """Grid extent, resolution, and channel layout.

    (x_max - x_min) / r_x and (y_max - y_min) / r_y must be exact positive
    integers. z is clamped into ``z_clamp`` before height aggregation and the
    log-density channel saturates at ``n_cap`` points per cell.
    """

    x_min: float = 0.0
    x_max: float = 60.0
    y_min: float = -30.0
    y_max: float = 30.0
    r_x: float = 0.125
    r_y: float = 0.125
    channels: tuple = CHANNEL_KINDS
    z_clamp: tuple = (-3.0, 3.0)
    n_cap: int = 16

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "z_clamp", tuple(self.z_clamp))
        if self.r_x <= 0 or self.r_y <= 0:
            raise ValueError("cell resolution must be positive")
        for extent, res, name in ((self.x_max - self.x_min, self.r_x, "x"),
                                  (self.y_max - self.y_min, self.r_y, "y")):
            cells = extent / res
            if cells <= 0 or abs(cells - round(cells)) > 1e-9:
                raise ValueError(f"{name} extent / resolution = {cells} is not a positive integer")
        if not self.channels:
            raise ValueError("at least one channel required")
        for ch in self.channels:
            if ch not in CHANNEL_KINDS:
                raise ValueError(f"unknown channel kind {ch!r}")
        if not (len(self.z_clamp) == 2 and self.z_clamp[0] <= self.z_clamp[1]):
            raise ValueError("z_clamp must be (lo, hi) with lo <= hi")
        if self.n_cap < 1:
            raise ValueError("n_cap must be >= 1")

    @property
    def height(self) -> int:
        return round((self.x_max - self.x_min) / self.r_x)

    @property
    def width(self) -> int:
        return round((self.y_max - self.y_min) / self.r_y)


@dataclass(frozen=True)
class BevGrid:
    """H x W x C float32 raster with optional channel names."""

    data: np.ndarray
    channels: Optional[tuple] = None
    frame_id: int = 0
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ShapeMismatchError("grid data must be H x W x C")
        if validate and not np.isfinite(data).all():
            raise ValueError("grid contains NaN/Inf")
        if self.channels is not None:
            channels = tuple(self.channels)
            if len(channels) != data.shape[2]:
                raise ShapeMismatchError(
                    f"{len(channels)} channel names for {data.shape[2]} channels"
                )
            object.__setattr__(self, "channels", channels)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]

    def channel(self, name: str) -> np.ndarray:
        if self.channels is None or name not in self.channels:
            raise KeyError(f"grid has no channel named {name!r}")
        return self.data[:, :, self.channels.index(name)]


def cell_of(point: Sequence[float], cfg: BevConfig):
    """Map a point to its (u, v) cell, or None when outside the grid."""
    u = np.floor((float(point[0]) - cfg.x_min) / cfg.r_x)
    v = np.floor((float(point[1]) - cfg.y_min) / cfg.r_y)
    if u < 0 or u >= cfg.height or v < 0 or v >= cfg.width:
        return None
    return int(u), int(v)


@njit(cache=True)
def _raster_kernel(x, y, z, inten, x_min, y_min, r_x, r_y, h, w, z_lo, z_hi, n_cap):
    ncell = h * w
    cnt = np.zeros(ncell, np.int64)
    s_int = np.zeros(ncell, np.float64)
    mx = np.full(ncell, -np.inf, np.float64)
    n_filtered = 0
    for i in range(x.shape[0]):
        uf = np.floor((x[i] - x_min) / r_x)
        vf = np.floor((y[i] - y_min) / r_y)
        if uf < 0 or uf >= h or vf < 0 or vf >= w:
            n_filtered += 1
            continue
        f = int(uf) * w + int(vf)
        zc = z[i]
        if zc < z_lo:
            zc = z_lo
        elif zc > z_hi:
            zc = z_hi
        if zc > mx[f]:
            mx[f] = zc
        cnt[f] += 1
        s_int[f] += inten[i]
    out = np.zeros((ncell, 4), np.float32)
    log_cap = np.log1p(np.float64(n_cap))
    for f in range(ncell):
        c = cnt[f]
        if c > 0:
            out[f, 0] = mx[f]
            out[f, 1] = s_int[f] / c
            n_eff = c if c < n_cap else n_cap
            out[f, 2] = np.log1p(np.float64(n_eff)) / log_cap
            out[f, 3] = 1.0
    return out, n_filtered


def rasterize(cloud: PointCloud, cfg: BevConfig, frame_id: int = 0) -> BevGrid:
    """Aggregate a point cloud into a BEV grid.

    Empty cells are zero in every channel. Max-height and occupancy are
    bitwise order-independent; mean intensity is reproducible to < 1e-6
    under point permutation (float64 accumulation).
    """
    h, w = cfg.height, cfg.width
    base, _ = _raster_kernel(cloud.x, cloud.y, cloud.z, cloud.intensity,
                             float(cfg.x_min), float(cfg.y_min),
                             float(cfg.r_x), float(cfg.r_y),
                             h, w, float(cfg.z_clamp[0]), float(cfg.z_clamp[1]),
                             int(cfg.n_cap))
    cols = [CHANNEL_KINDS.index(ch) for ch in cfg.channels]
    data = np.ascontiguousarray(base[:, cols].reshape(h, w, len(cols)))
    return BevGrid(data, channels=cfg.channels, frame_id=frame_id, validate=False)


def count_in_range(cloud: PointCloud, cfg: BevConfig) -> int:
    """Number of points that land inside the grid (the rest get filtered)."""
    u = np.floor((cloud.x - cfg.x_min) / cfg.r_x)
    v = np.floor((cloud.y - cfg.y_min) / cfg.r_y)
    ok = (u >= 0) & (u < cfg.height) & (v >= 0) & (v < cfg.width)
    return int(np.count_nonzero(ok))


def pseudo_residual(current: BevGrid, past: BevGrid) -> BevGrid:
    """Element-wise current - past; highlights dynamic content across frames."""
    if current.data.shape != past.data.shape:
        raise ShapeMismatchError(
            f"residual shapes differ: {current.data.shape} vs {past.data.shape}"
        )
    return BevGrid(current.data - past.data, channels=current.channels,
                   frame_id=current.frame_id, validate=False)


def static_disparity(grid: BevGrid, channel="max_height") -> BevGrid:
    """Square-and-normalize the height/depth channel, other channels untouched.

    The channel becomes v^2 / max(v^2) taken over the occupied (nonzero)
    cells; an all-zero channel stays all-zero. Squaring is monotone on
    magnitudes, so the ordering of distinct values is preserved and the
    maximum lands exactly at 1.
    """
    if isinstance(channel, str):
        if grid.channels is None or channel not in grid.channels:
            raise ValueError(f"grid has no channel named {channel!r}")
        ci = grid.channels.index(channel)
    else:
        ci = int(channel)
        if not 0 <= ci < grid.n_channels:
            raise ValueError(f"channel index {ci} out of range")
    data = np.array(grid.data)  # writable copy
    v = data[:, :, ci]
    q = v * v
    if np.any(v != 0.0):
        data[:, :, ci] = q / q.max()
    return BevGrid(data, channels=grid.channels, frame_id=grid.frame_id, validate=False)


def stack_motion_frames(frames: Sequence[BevGrid]) -> BevGrid:
    """Channel-concatenate 3 same-shape grids ordered oldest to newest."""
    if len(frames) != 3:
        raise ShapeMismatchError(f"need exactly 3 frames, got {len(frames)}")
    shape = frames[0].data.shape
    for f in frames[1:]:
        if f.data.shape != shape:
            raise ShapeMismatchError(f"frame shapes differ: {shape} vs {f.data.shape}")
    data = np.concatenate([f.data for f in frames], axis=2)
    if all(f.channels is not None for f in frames):
        channels = tuple(f"t{i}_{name}" for i, f in enumerate(frames) for name in f.channels)
    else:
        channels = None
    return BevGrid(data, channels=channels, frame_id=frames[-1].frame_id, validate=False)


# --- container format -------------------------------------------------------
# 16-byte header (magic "BEVG", u16 H, u16 W, u16 C, u16 dtype tag, u32
# reserved) followed by the row-major little-endian payload. BEV grids always
# use tag 1 (float32); tag 2 (float64) exists for parameter tensors.


def write_container(path, array: np.ndarray, dtype_tag: int = 1) -> None:
    arr = np.asarray(array)
    if arr.ndim != 3:
        raise ShapeMismatchError("container payload must be rank-3")
    h, w, c = arr.shape
    if max(h, w, c) > 0xFFFF:
        raise ValueError("dimension exceeds u16 header field")
    if dtype_tag not in DTYPE_TAGS:
        raise ContainerFormatError(f"unknown dtype tag {dtype_tag}")
    payload = np.ascontiguousarray(arr, dtype=DTYPE_TAGS[dtype_tag])
    with open(path, "wb") as fh:
        fh.write(BEVG_HEADER.pack(BEVG_MAGIC, h, w, c, dtype_tag, 0))
        fh.write(payload.tobytes())


def read_container(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < BEVG_HEADER.size:
        raise TruncatedFileError(f"{path}: shorter than the 16-byte header")
    magic, h, w, c, tag, _ = BEVG_HEADER.unpack_from(blob)
    if magic != BEVG_MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}")
    if tag not in DTYPE_TAGS:
        raise ContainerFormatError(f"{path}: unknown dtype tag {tag}")
    dtype = DTYPE_TAGS[tag]
    expected = BEVG_HEADER.size + h * w * c * dtype.itemsize
    if len(blob) != expected:
        raise TruncatedFileError(f"{path}: {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype=dtype, offset=BEVG_HEADER.size)
    return data.reshape(h, w, c).copy()


def save_bevg(grid: BevGrid, path) -> None:
    """Write a grid in the on-disk container format (bit-exact round trip)."""
    write_container(path, grid.data, dtype_tag=1)


def load_bevg(path, channels: Optional[tuple] = None, frame_id: int = 0) -> BevGrid:
    data = read_container(path)
    if data.dtype != np.float32:
        raise ContainerFormatError(f"{path}: BEV grids must be float32 (tag 1)")
    return BevGrid(data, channels=channels, frame_id=frame_id, validate=False)
