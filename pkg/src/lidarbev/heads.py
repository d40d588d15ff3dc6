"""Decoding of network-head rasters into discrete detections.

Objects are represented as keypoints: a cell in the BEV heatmap marks a
center, the orientation is a binned classification over [0, 180) degrees
decoded at the bin center, and width/length come from a per-cell regression
map. Keypoints are strict local maxima of their window neighborhood, so two
returned peaks can never share a suppression window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .bev_raster import BevConfig
from .errors import LengthMismatchError, ShapeMismatchError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.3
DEFAULT_WINDOW = 3


@dataclass(frozen=True)
class HeadRasters:
    """Raw head outputs: keypoint scores, orientation logits, dimension map.

    The orientation raster must carry exactly 180 / delta_theta_deg channels
    (36 at the default 5-degree bins).
    """

    keypoint_heatmap: np.ndarray   # (H, W) scores in [0, 1]
    orientation_logits: np.ndarray  # (H, W, 180 / delta_theta)
    dims_map: np.ndarray           # (H, W, 2): width, length in meters
    delta_theta_deg: float = 5.0

    def __post_init__(self):
        hm = np.ascontiguousarray(self.keypoint_heatmap, dtype=np.float64)
        logits = np.ascontiguousarray(self.orientation_logits, dtype=np.float64)
        dims = np.ascontiguousarray(self.dims_map, dtype=np.float64)
        if hm.ndim != 2:
            raise ShapeMismatchError("heatmap must be H x W")
        if np.any(hm < 0.0) or np.any(hm > 1.0):
            raise ValueError("heatmap scores must lie in [0, 1]")
        n_bins = 180.0 / self.delta_theta_deg
        if abs(n_bins - round(n_bins)) > 1e-9:
            raise ValueError(f"180 / {self.delta_theta_deg} is not an integer bin count")
        expected = (*hm.shape, round(n_bins))
        if logits.shape != expected:
            raise ShapeMismatchError(f"orientation logits {logits.shape}, expected {expected}")
        if dims.shape != (*hm.shape, 2):
            raise ShapeMismatchError(f"dims map {dims.shape}, expected {(*hm.shape, 2)}")
        for name, arr in (("keypoint_heatmap", hm), ("orientation_logits", logits),
                          ("dims_map", dims)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_bins(self) -> int:
        return self.orientation_logits.shape[2]


@dataclass(frozen=True)
class Detection:
    """One decoded object: BEV keypoint, metric center, yaw bin, box dims."""

    u: int
    v: int
    cx: float
    cy: float
    yaw_deg: float
    width: float
    length: float
    score: float
    frame_id: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ValueError("width and length must be positive")
        if not 0.0 <= self.yaw_deg < 180.0:
            raise ValueError("yaw must lie in [0, 180)")


def extract_keypoints(heatmap: np.ndarray, threshold: float,
                      window: int = DEFAULT_WINDOW) -> list[tuple[int, int, float]]:
    """Cells that strictly dominate their window neighborhood and clear the threshold.

    Returns (u, v, score) tuples sorted by descending score, ties broken by
    ascending (u, v). ``window`` is the odd side length of the neighborhood;
    window = 1 disables suppression entirely.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 1")
    hm = np.asarray(heatmap, dtype=np.float64)
    if hm.ndim != 2:
        raise ShapeMismatchError("heatmap must be H x W")
    if window == 1:
        strict = np.ones_like(hm, dtype=bool)
    else:
        footprint = np.ones((window, window), dtype=bool)
        footprint[window // 2, window // 2] = False
        neighbor_max = maximum_filter(hm, footprint=footprint,
                                      mode="constant", cval=-np.inf)
        strict = hm > neighbor_max
    keep = strict & (hm >= threshold)
    us, vs = np.nonzero(keep)
    scores = hm[us, vs]
    order = np.lexsort((vs, us, -scores))
    return [(int(us[i]), int(vs[i]), float(scores[i])) for i in order]


def decode_orientation(logits: np.ndarray, delta_theta_deg: float = 5.0) -> float:
    """Yaw at the center of the argmax bin; ties go to the lower bin index."""
    vec = np.asarray(logits, dtype=np.float64).ravel()
    n_bins = 180.0 / delta_theta_deg
    if abs(n_bins - round(n_bins)) > 1e-9 or vec.shape[0] != round(n_bins):
        raise LengthMismatchError(
            f"logit vector of length {vec.shape[0]} does not match "
            f"180 / {delta_theta_deg} bins"
        )
    return (int(np.argmax(vec)) + 0.5) * delta_theta_deg


def assemble_detections(rasters: HeadRasters, cfg: BevConfig,
                        threshold: float = DEFAULT_THRESHOLD,
                        window: int = DEFAULT_WINDOW,
                        frame_id: int = 0) -> list[Detection]:
    """Compose keypoints, orientation, and dimensions into detections.

    The metric center is the cell center under the inverse of the BEV cell
    mapping. Keypoints whose regressed dimensions are non-positive are
    dropped with a logged count.
    """
    if rasters.keypoint_heatmap.shape != (cfg.height, cfg.width):
        raise ShapeMismatchError(
            f"heatmap {rasters.keypoint_heatmap.shape} does not match grid "
            f"{(cfg.height, cfg.width)}"
        )
    keypoints = extract_keypoints(rasters.keypoint_heatmap, threshold, window)
    detections = []
    n_dropped = 0
    for u, v, score in keypoints:
        width, length = rasters.dims_map[u, v]
        if width <= 0.0 or length <= 0.0:
            n_dropped += 1
            continue
        yaw = decode_orientation(rasters.orientation_logits[u, v], rasters.delta_theta_deg)
        detections.append(Detection(
            u=u, v=v,
            cx=cfg.x_min + (u + 0.5) * cfg.r_x,
            cy=cfg.y_min + (v + 0.5) * cfg.r_y,
            yaw_deg=yaw, width=float(width), length=float(length),
            score=score, frame_id=frame_id,
        ))
    if n_dropped:
        logger.warning("dropped %d keypoints with non-positive dimensions", n_dropped)
    return detections


def save_detections(detections, path) -> None:
    """Line format: ``frame_id cx cy yaw_deg width length score``."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for d in detections:
            fh.write(f"{d.frame_id} {d.cx:.6f} {d.cy:.6f} {d.yaw_deg:.6f} "
                     f"{d.width:.6f} {d.length:.6f} {d.score:.6f}\n")


def load_detection_rows(path) -> list[tuple]:
    """Parse detection lines into (frame_id, cx, cy, yaw, width, length, score)."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            fields = line.split()
            rows.append((int(fields[0]), *(float(f) for f in fields[1:7])))
    return rows


def load_ground_truth_rows(path) -> list[tuple]:
    """Ground-truth lines: the detection format plus a trailing difficulty column.

    Returns (frame_id, cx, cy, yaw, width, length, score, difficulty) tuples.
    """
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            fields = line.split()
            rows.append((int(fields[0]), *(float(f) for f in fields[1:7]),
                         int(fields[7])))
    return rows
