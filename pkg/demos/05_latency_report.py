#!/usr/bin/env python3
"""Walk-through: measuring pipeline-stage latency.

Times the rasterizer and the temporal-channel ops on a 125k-point workload
and prints a comparison table (speedup relative to the first stage), the
same shape the ``lidarbev bench`` command writes as JSON.
"""

import numpy as np

from lidarbev import BevConfig, latency_bench, pseudo_residual, rasterize
from lidarbev.metrics import environment_fingerprint
from lidarbev.pointcloud_io import PointCloud

rng = np.random.default_rng(0)
n = 125_000
cloud = PointCloud(rng.uniform(0, 60, n), rng.uniform(-30, 30, n),
                   rng.uniform(-3, 3, n), rng.uniform(0, 1, n))
cfg = BevConfig()
grid_a = rasterize(cloud, cfg)
grid_b = rasterize(PointCloud(cloud.x, -cloud.y, cloud.z, cloud.intensity), cfg)

reports = [
    latency_bench("rasterize-125k", lambda: rasterize(cloud, cfg),
                  repeats=50, warmup=5),
    latency_bench("pseudo-residual", lambda: pseudo_residual(grid_a, grid_b),
                  repeats=50, warmup=5),
]

baseline = reports[0].mean_ms
print(f"{'stage':<18} {'mean_ms':>9} {'p50_ms':>9} {'p99_ms':>9} {'speedup':>8}")
for r in reports:
    print(f"{r.stage:<18} {r.mean_ms:>9.3f} {r.p50_ms:>9.3f} {r.p99_ms:>9.3f} "
          f"{baseline / r.mean_ms:>8.2f}")
print("environment:", environment_fingerprint())
