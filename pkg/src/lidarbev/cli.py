"""Batch command-line front end for dataset-scale runs.

Commands: rasterize, densify, plan-epoch, swag-check, eval, bench. Exit
codes: 0 success, 1 partial failure (some files failed, the rest were
processed), 2 configuration error. Every command validates its configuration
before touching outputs, writes files atomically (temp + rename), and is
byte-identical across runs for fixed inputs and seeds (bench timing values
are measurements and excluded from that guarantee).
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bev_raster import count_in_range, load_bevg, pseudo_residual, rasterize, save_bevg, \
    stack_motion_frames
from .config import load_run_config
from .errors import ConfigError, LidarBevError
from .geometry import densify
from .heads import load_detection_rows, load_ground_truth_rows
from .metrics import (
    GroundTruthBox,
    RotatedBox,
    ScoredBox,
    average_precision,
    environment_fingerprint,
    latency_bench,
    mean_iou,
    segmentation_iou,
)
from .pointcloud_io import PointCloud, read_cloud, write_cloud
from .sampler import build_epoch_plan
from .swag import FeatureMap, SwagParams, finite_difference_check, swag_forward

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

BENCH_STAGES = ("rasterize", "densify", "residual", "stack", "swag-forward")


def _atomic(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _atomic_json(path: Path, obj) -> None:
    payload = (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("ascii")
    _atomic(path, lambda p: p.write_bytes(payload))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_config_or_exit(config_path, seed):
    try:
        return load_run_config(config_path, seed_override=seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _run_file_batch(files, worker, jobs: int):
    """Apply worker to each file, collecting per-file rows and errors."""
    rows, errors = [], []

    def run_one(path):
        try:
            return path.name, worker(path), None
        except (LidarBevError, OSError) as exc:
            return path.name, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, files))
    else:
        results = [run_one(f) for f in files]
    for name, row, error in sorted(results, key=lambda r: r[0]):
        if error is None:
            rows.append(row)
        else:
            errors.append({"name": name, "error": error})
    return rows, errors


def _write_manifest(out_dir: Path, command: str, cfg, rows, errors, totals) -> None:
    manifest = {
        "tool": "lidarbev",
        "tool_version": __version__,
        "command": command,
        "config_hash": cfg.config_hash,
        "totals": {**totals, "files_ok": len(rows), "files_failed": len(errors)},
        "files": rows,
        "errors": errors,
    }
    _atomic_json(out_dir / "manifest.json", manifest)


@click.group()
@click.version_option(version=__version__, prog_name="lidarbev")
def cli():
    """LiDAR BEV multi-task perception toolkit."""


@cli.command("rasterize")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def cmd_rasterize(input_dir, config_path, seed, jobs, out_dir):
    """Rasterize every .bin cloud in INPUT_DIR into a .bevg grid."""
    cfg = _load_config_or_exit(config_path, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(input_dir.glob("*.bin"))
    bev = cfg.bev

    def worker(path: Path) -> dict:
        cloud = read_cloud(path)
        grid = rasterize(cloud, bev)
        out = out_dir / (path.stem + ".bevg")
        _atomic(out, lambda p: save_bevg(grid, p))
        return {
            "name": path.name,
            "output": out.name,
            "points": cloud.count,
            "points_filtered": cloud.count - count_in_range(cloud, bev),
            "sha256": _sha256(out),
        }

    rows, errors = _run_file_batch(files, worker, jobs)
    totals = {
        "points": sum(r["points"] for r in rows),
        "points_filtered": sum(r["points_filtered"] for r in rows),
    }
    _write_manifest(out_dir, "rasterize", cfg, rows, errors, totals)
    for err in errors:
        click.echo(f"failed: {err['name']}: {err['error']}", err=True)
    sys.exit(EXIT_PARTIAL if errors else EXIT_OK)


@cli.command("densify")
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def cmd_densify(input_dir, config_path, seed, jobs, out_dir):
    """Write range-densified copies of every .bin cloud in INPUT_DIR."""
    cfg = _load_config_or_exit(config_path, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(input_dir.glob("*.bin"))
    dcfg = cfg.densify

    def worker(path: Path) -> dict:
        cloud = read_cloud(path)
        dense = densify(cloud, dcfg)
        out = out_dir / path.name
        _atomic(out, lambda p: write_cloud(dense, p))
        return {
            "name": path.name,
            "output": out.name,
            "points_in": cloud.count,
            "points_out": dense.count,
            "sha256": _sha256(out),
        }

    rows, errors = _run_file_batch(files, worker, jobs)
    totals = {
        "points_in": sum(r["points_in"] for r in rows),
        "points_out": sum(r["points_out"] for r in rows),
    }
    _write_manifest(out_dir, "densify", cfg, rows, errors, totals)
    for err in errors:
        click.echo(f"failed: {err['name']}: {err['error']}", err=True)
    sys.exit(EXIT_PARTIAL if errors else EXIT_OK)


@cli.command("plan-epoch")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--epoch", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
def cmd_plan_epoch(config_path, seed, epoch, out_path):
    """Write the asynchronous epoch plan for the configured datasets."""
    cfg = _load_config_or_exit(config_path, seed)
    if epoch < 0:
        click.echo("config error: epoch must be non-negative", err=True)
        sys.exit(EXIT_CONFIG)
    plan = build_epoch_plan(cfg.dataset_specs, epoch, cfg.schedule, cfg.seed)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _atomic(out_path, plan.save)
    click.echo(f"wrote {plan.n_iterations} iterations to {out_path}")
    sys.exit(EXIT_OK)


@cli.command("swag-check")
@click.option("--height", type=int, default=4, show_default=True)
@click.option("--width", type=int, default=4, show_default=True)
@click.option("--c-sem", type=int, default=3, show_default=True)
@click.option("--d-od", type=int, default=5, show_default=True)
@click.option("--k-dim", type=int, default=2, show_default=True)
@click.option("--seeds", type=int, default=10, show_default=True,
              help="Number of seeded instances to check.")
@click.option("--tolerance", type=float, default=1e-5, show_default=True)
@click.option("--step", type=float, default=1e-5, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def cmd_swag_check(height, width, c_sem, d_od, k_dim, seeds, tolerance, step, out_path):
    """Verify analytic gate gradients against central finite differences."""
    if min(height, width, c_sem, d_od, k_dim) < 1 or seeds < 1:
        click.echo("config error: shape and seed counts must be >= 1", err=True)
        sys.exit(EXIT_CONFIG)
    checks = [finite_difference_check(c_sem, d_od, k_dim, height, width, s, step=step)
              for s in range(seeds)]
    worst = max(c["max_rel_error"] for c in checks)
    passed = bool(worst <= tolerance)
    report = {
        "metric": "swag_gradient_check",
        "tolerance": tolerance,
        "passed": passed,
        "max_rel_error": worst,
        "checks": checks,
        "environment": environment_fingerprint(),
        "tool_version": __version__,
    }
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_json(out_path, report)
    status = "PASS" if passed else "FAIL"
    click.echo(f"{status}: max relative gradient error {worst:.3e} "
               f"(tolerance {tolerance:.1e}, {seeds} instances)")
    sys.exit(EXIT_OK if passed else EXIT_PARTIAL)


def _eval_ap(cfg, dets_path, gt_path):
    dets = [ScoredBox(frame_id=r[0],
                      box=RotatedBox(cx=r[1], cy=r[2], yaw_deg=r[3], width=r[4], length=r[5]),
                      score=r[6])
            for r in load_detection_rows(dets_path)]
    gts = [GroundTruthBox(frame_id=r[0],
                          box=RotatedBox(cx=r[1], cy=r[2], yaw_deg=r[3], width=r[4], length=r[5]),
                          difficulty=r[7])
           for r in load_ground_truth_rows(gt_path)]
    ap = average_precision(dets, gts, iou_thresh=cfg.raw["eval"]["iou_thresh"])
    return {
        "metric": "average_precision",
        "value": ap,
        "iou_threshold": cfg.raw["eval"]["iou_thresh"],
        "n_detections": len(dets),
        "n_ground_truths": len(gts),
    }


def _eval_seg_iou(dets_path, gt_path, classes_arg):
    pred = load_bevg(dets_path).data[:, :, 0].round().astype(np.int64)
    gt = load_bevg(gt_path).data[:, :, 0].round().astype(np.int64)
    if classes_arg:
        classes = [int(c) for c in classes_arg.split(",")]
    else:
        classes = sorted(set(np.unique(pred)) | set(np.unique(gt)))
    per_class = segmentation_iou(pred, gt, classes)
    return {
        "metric": "segmentation_iou",
        "per_class": {str(c): v for c, v in per_class.items()},
        "mean_iou": mean_iou(per_class),
        "classes": [int(c) for c in classes],
    }


@cli.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dets", "dets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["ap", "seg-iou"]), default="ap", show_default=True)
@click.option("--classes", "classes_arg", default=None,
              help="Comma-separated class ids for seg-iou (default: classes present).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def cmd_eval(config_path, dets_path, gt_path, mode, classes_arg, out_path):
    """Score a detections file against ground truth, or two class rasters."""
    cfg = _load_config_or_exit(config_path, None)
    try:
        if mode == "ap":
            report = _eval_ap(cfg, dets_path, gt_path)
        else:
            report = _eval_seg_iou(dets_path, gt_path, classes_arg)
    except (LidarBevError, ValueError, IndexError) as exc:
        click.echo(f"failed: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_PARTIAL)
    report["environment"] = environment_fingerprint()
    report["tool_version"] = __version__
    report["config_hash"] = cfg.config_hash
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_json(out_path, report)
    click.echo(json.dumps({k: report[k] for k in report
                           if k not in ("environment", "checks")}, sort_keys=True))
    sys.exit(EXIT_OK)


def _fuzz_cloud(rng: np.random.Generator, n: int, bev) -> PointCloud:
    # ~2% of points intentionally outside the grid to exercise filtering.
    x = rng.uniform(bev.x_min - 0.02 * (bev.x_max - bev.x_min), bev.x_max, n)
    y = rng.uniform(bev.y_min, bev.y_max, n)
    z = rng.uniform(bev.z_clamp[0] - 1.0, bev.z_clamp[1] + 1.0, n)
    inten = rng.uniform(0.0, 1.0, n)
    return PointCloud(x, y, z, inten)


def _bench_stage_fn(stage: str, cfg, rng, n_points: int):
    bev = cfg.bev
    if stage == "rasterize":
        cloud = _fuzz_cloud(rng, n_points, bev)
        return lambda: rasterize(cloud, bev)
    if stage == "densify":
        cloud = _fuzz_cloud(rng, n_points, bev)
        return lambda: densify(cloud, cfg.densify)
    if stage == "residual":
        grids = [rasterize(_fuzz_cloud(rng, n_points, bev), bev) for _ in range(2)]
        return lambda: pseudo_residual(grids[1], grids[0])
    if stage == "stack":
        grids = [rasterize(_fuzz_cloud(rng, n_points, bev), bev) for _ in range(3)]
        return lambda: stack_motion_frames(grids)
    if stage == "swag-forward":
        params = SwagParams.random(rng, c_sem=8, d_od=8, k=4)
        f_sem = FeatureMap(rng.normal(0.0, 1.0, (64, 64, 8)), "semantic")
        f_od = FeatureMap(rng.normal(0.0, 1.0, (64, 64, 8)), "detection")
        return lambda: swag_forward(f_sem, f_od, params)
    raise ValueError(stage)


@cli.command("bench")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--stage", "stages_arg", default="rasterize,densify,residual", show_default=True,
              help=f"Comma-separated stages from {BENCH_STAGES}.")
@click.option("--points", type=int, default=125000, show_default=True)
@click.option("--repeats", type=int, default=20, show_default=True)
@click.option("--warmup", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
def cmd_bench(config_path, seed, stages_arg, points, repeats, warmup, out_path):
    """Latency comparison across pipeline stages (first stage is the baseline)."""
    cfg = _load_config_or_exit(config_path, seed)
    stages = [s.strip() for s in stages_arg.split(",") if s.strip()]
    bad = [s for s in stages if s not in BENCH_STAGES]
    if bad or not stages or points < 1 or repeats < 1 or warmup < 0:
        click.echo(f"config error: bad bench parameters (unknown stages: {bad})", err=True)
        sys.exit(EXIT_CONFIG)

    reports = []
    for stage in stages:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, stages.index(stage)]))
        fn = _bench_stage_fn(stage, cfg, rng, points)
        reports.append(latency_bench(stage, fn, repeats=repeats, warmup=warmup))

    baseline = reports[0].mean_ms
    rows = [{**r.to_dict(), "speedup_vs_baseline": baseline / r.mean_ms} for r in reports]
    report = {
        "metric": "stage_latency",
        "baseline": stages[0],
        "workload": {"points": points, "seed": cfg.seed,
                     "grid": f"{cfg.bev.height}x{cfg.bev.width}x{len(cfg.bev.channels)}"},
        "rows": rows,
        "environment": environment_fingerprint(),
        "tool_version": __version__,
        "config_hash": cfg.config_hash,
    }
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_json(out_path, report)
    click.echo(f"{'stage':<16} {'mean_ms':>9} {'p50_ms':>9} {'p99_ms':>9} {'speedup':>8}")
    for row in rows:
        click.echo(f"{row['stage']:<16} {row['mean_ms']:>9.3f} {row['p50_ms']:>9.3f} "
                   f"{row['p99_ms']:>9.3f} {row['speedup_vs_baseline']:>8.2f}")
    sys.exit(EXIT_OK)


def main():
    cli(prog_name="lidarbev")


if __name__ == "__main__":
    main()
