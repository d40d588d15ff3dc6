"""LiDAR bird's-eye-view multi-task perception toolkit.

Deterministic building blocks around a BEV multi-task pipeline: point-cloud
ingestion, range-based densification, BEV rasterization with pseudo-residual
channels, asynchronous heterogeneous-dataset epoch planning, gated
semantic/detection feature fusion numerics with verified gradients, task
losses, detection decoding, and evaluation metrics. A batch CLI
(``lidarbev``) drives dataset-scale runs.
"""

__version__ = "0.1.0"

from .bev_raster import (
    BevConfig,
    BevGrid,
    cell_of,
    load_bevg,
    pseudo_residual,
    rasterize,
    save_bevg,
    stack_motion_frames,
    static_disparity,
)
from .geometry import (
    DensifyConfig,
    SphericalCoords,
    densify,
    from_spherical,
    motion_compensate,
    to_spherical,
)
from .heads import (
    Detection,
    HeadRasters,
    assemble_detections,
    decode_orientation,
    extract_keypoints,
)
from .losses import (
    LossWeights,
    focal_loss,
    masked_box_loss,
    rotate_weights,
    smooth_l1,
    total_loss,
)
from .metrics import (
    GroundTruthBox,
    LatencyReport,
    RotatedBox,
    ScoredBox,
    average_precision,
    latency_bench,
    mean_iou,
    rotated_iou,
    segmentation_iou,
)
from .pointcloud_io import (
    PointCloud,
    PointLabels,
    Pose,
    read_cloud,
    read_labels,
    read_poses,
    write_cloud,
    write_labels,
)
from .sampler import (
    AugmentationSchedule,
    DatasetSpec,
    EpochPlan,
    build_epoch_plan,
    load_plan,
    remap_index,
    select_motion_frames,
    semantic_stride_filter,
)
from .swag import (
    FeatureMap,
    SwagParams,
    finite_difference_check,
    naive_concat_baseline,
    swag_backward,
    swag_forward,
)

__all__ = [name for name in dir() if not name.startswith("_")]
