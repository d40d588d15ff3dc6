#!/usr/bin/env python3
"""Generate native-side expected outputs for the cross-boundary tests.

Every expected artifact is produced by the core library in-process; the
TypeScript tests must reproduce them bit for bit through the CLI and the
serialized formats. Clouds are quantized to float32 before native use so
the `.bin` files and the in-memory arrays agree exactly.

Usage: gen_fixtures.py OUT_DIR
"""

import json
import sys
from pathlib import Path

import numpy as np

from lidarbev.bev_raster import BevConfig, pseudo_residual, rasterize, save_bevg, \
    stack_motion_frames
from lidarbev.geometry import DensifyConfig, densify
from lidarbev.pointcloud_io import PointCloud, write_cloud
from lidarbev.sampler import AugmentationSchedule, DatasetSpec, build_epoch_plan, load_plan

N_CASES = 100
DENSIFY_SEED = 7

BEV = BevConfig(x_min=0.0, x_max=4.0, y_min=-2.0, y_max=2.0, r_x=0.125, r_y=0.125)
DENSIFY = DensifyConfig(delta_r_min=0.1, delta_r_max=0.3, copies_per_point=1,
                        seed=DENSIFY_SEED)


def fuzz_cloud(seed: int) -> PointCloud:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(16, 1024))
    x = rng.uniform(-0.5, 4.5, n).astype(np.float32)
    y = rng.uniform(-2.5, 2.5, n).astype(np.float32)
    z = rng.uniform(-4.0, 4.0, n).astype(np.float32)
    i = rng.uniform(0.0, 1.0, n).astype(np.float32)
    # avoid exact origin points so densify never skips
    x[(x == 0) & (y == 0) & (z == 0)] = np.float32(0.5)
    return PointCloud(x, y, z, i)


def main(out_dir: Path) -> None:
    clouds_dir = out_dir / "clouds"
    rasters_dir = out_dir / "rasters"
    dense_dir = out_dir / "dense"
    for d in (clouds_dir, rasters_dir, dense_dir):
        d.mkdir(parents=True, exist_ok=True)

    grids = []
    for case in range(N_CASES):
        cloud = fuzz_cloud(case)
        write_cloud(cloud, clouds_dir / f"case_{case:03d}.bin")
        grid = rasterize(cloud, BEV)
        save_bevg(grid, rasters_dir / f"case_{case:03d}.bevg")
        write_cloud(densify(cloud, DENSIFY), dense_dir / f"case_{case:03d}.bin")
        if case < 3:
            grids.append(grid)

    save_bevg(pseudo_residual(grids[1], grids[0]), out_dir / "residual.bevg")
    save_bevg(stack_motion_frames(grids), out_dir / "stack.bevg")

    specs = [DatasetSpec("det", 40, "detection"), DatasetSpec("sem", 50, "semantic"),
             DatasetSpec("mot", 30, "motion")]
    plan = build_epoch_plan(specs, epoch=2, sched=AugmentationSchedule(total_epochs=10),
                            seed=9)
    plan.save(out_dir / "plan.txt")
    rows = [row._asdict() for row in load_plan(out_dir / "plan.txt")]
    (out_dir / "plan_rows.json").write_text(json.dumps(rows))

    meta = {
        "n_cases": N_CASES,
        "densify_seed": DENSIFY_SEED,
        "bev": {"x_min": BEV.x_min, "x_max": BEV.x_max, "y_min": BEV.y_min,
                "y_max": BEV.y_max, "r_x": BEV.r_x, "r_y": BEV.r_y},
        "densify": {"delta_r_min": DENSIFY.delta_r_min,
                    "delta_r_max": DENSIFY.delta_r_max,
                    "copies_per_point": DENSIFY.copies_per_point},
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {N_CASES} fixture cases to {out_dir}")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
