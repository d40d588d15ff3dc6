/**
 * In-process bindings for deep-learning data pipelines.
 *
 * Heavy operations (rasterize, densify) cross into the native toolkit
 * through its CLI and serialized formats; results come back numerically
 * identical to native calls (bitwise on the bitwise-contracted channels).
 * The element-wise temporal ops (pseudo-residual, frame stacking) run here
 * on Float32Array buffers, which reproduce the native float32 arithmetic
 * bit for bit.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { Grid, pointsFromRows, readBevg, readCloudBin, writeCloudBin } from "./formats";
import { runCli } from "./native";

export {
  Grid,
  PlanRow,
  iterPlanRows,
  loadPlan,
  pointsFromRows,
  readBevg,
  readCloudBin,
  writeBevg,
  writeCloudBin,
} from "./formats";
export { cliCommand, runCli } from "./native";

export interface BevOptions {
  xMin?: number;
  xMax?: number;
  yMin?: number;
  yMax?: number;
  rX?: number;
  rY?: number;
  channels?: string[];
  zClamp?: [number, number];
  nCap?: number;
}

export interface DensifyOptions {
  deltaRMin?: number;
  deltaRMax?: number;
  copiesPerPoint?: number;
  seed?: number;
}

export type Points = Float32Array | ArrayLike<number>[];

function asFloat32(points: Points): Float32Array {
  if (points instanceof Float32Array) {
    if (points.length % 4 !== 0) {
      throw new Error(`flat point buffer length ${points.length} is not n x 4`);
    }
    return points;
  }
  return pointsFromRows(points);
}

function bevSection(options: BevOptions): Record<string, unknown> {
  const section: Record<string, unknown> = {};
  if (options.xMin !== undefined) section.x_min = options.xMin;
  if (options.xMax !== undefined) section.x_max = options.xMax;
  if (options.yMin !== undefined) section.y_min = options.yMin;
  if (options.yMax !== undefined) section.y_max = options.yMax;
  if (options.rX !== undefined) section.r_x = options.rX;
  if (options.rY !== undefined) section.r_y = options.rY;
  if (options.channels !== undefined) section.channels = options.channels;
  if (options.zClamp !== undefined) section.z_clamp = options.zClamp;
  if (options.nCap !== undefined) section.n_cap = options.nCap;
  return section;
}

function densifySection(options: DensifyOptions): Record<string, unknown> {
  const section: Record<string, unknown> = {};
  if (options.deltaRMin !== undefined) section.delta_r_min = options.deltaRMin;
  if (options.deltaRMax !== undefined) section.delta_r_max = options.deltaRMax;
  if (options.copiesPerPoint !== undefined) section.copies_per_point = options.copiesPerPoint;
  return section;
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "lidarbev-bind-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

function writeConfig(dir: string, sections: Record<string, unknown>): string {
  const cfgPath = path.join(dir, "config.json");
  fs.writeFileSync(cfgPath, JSON.stringify({ schema_version: 1, ...sections }));
  return cfgPath;
}

/** Rasterize every `.bin` cloud in a directory with one native invocation. */
export function rasterizeDir(inDir: string, outDir: string,
                             options: BevOptions = {}): void {
  withTempDir((tmp) => {
    const cfg = writeConfig(tmp, { bev: bevSection(options) });
    runCli(["rasterize", inDir, "--config", cfg, "--out", outDir]);
  });
}

/** Densify every `.bin` cloud in a directory with one native invocation. */
export function densifyDir(inDir: string, outDir: string,
                           options: DensifyOptions = {}): void {
  withTempDir((tmp) => {
    const cfg = writeConfig(tmp, { densify: densifySection(options) });
    const args = ["densify", inDir, "--config", cfg, "--out", outDir];
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    runCli(args);
  });
}

/** Rasterize one n x 4 point array into an H x W x C grid. */
export function bindRasterize(points: Points, options: BevOptions = {}): Grid {
  const flat = asFloat32(points);
  return withTempDir((tmp) => {
    const inDir = path.join(tmp, "in");
    const outDir = path.join(tmp, "out");
    fs.mkdirSync(inDir);
    writeCloudBin(path.join(inDir, "cloud.bin"), flat);
    const cfg = writeConfig(tmp, { bev: bevSection(options) });
    runCli(["rasterize", inDir, "--config", cfg, "--out", outDir]);
    return readBevg(path.join(outDir, "cloud.bevg"));
  });
}

/** Densify one n x 4 point array; returns the grown n' x 4 array. */
export function bindDensify(points: Points, options: DensifyOptions = {}): Float32Array {
  const flat = asFloat32(points);
  return withTempDir((tmp) => {
    const inDir = path.join(tmp, "in");
    const outDir = path.join(tmp, "out");
    fs.mkdirSync(inDir);
    writeCloudBin(path.join(inDir, "cloud.bin"), flat);
    const cfg = writeConfig(tmp, { densify: densifySection(options) });
    const args = ["densify", inDir, "--config", cfg, "--out", outDir];
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    runCli(args);
    return readCloudBin(path.join(outDir, "cloud.bin"));
  });
}

function assertSameShape(a: Grid, b: Grid): void {
  if (a.height !== b.height || a.width !== b.width || a.channels !== b.channels ||
      a.dtypeTag !== b.dtypeTag) {
    throw new Error(
      `grid shapes differ: ${a.height}x${a.width}x${a.channels}/${a.dtypeTag} vs ` +
      `${b.height}x${b.width}x${b.channels}/${b.dtypeTag}`,
    );
  }
}

/** Element-wise current - past (float32 arithmetic, same bits as native). */
export function pseudoResidual(current: Grid, past: Grid): Grid {
  assertSameShape(current, past);
  if (current.dtypeTag !== 1) {
    throw new Error("pseudo-residual is defined on float32 grids");
  }
  const data = new Float32Array(current.data.length);
  for (let i = 0; i < data.length; i++) {
    data[i] = (current.data[i] as number) - (past.data[i] as number);
  }
  return { ...current, data };
}

/** Channel-concatenate 3 same-shape grids ordered oldest to newest. */
export function stackMotionFrames(frames: Grid[]): Grid {
  if (frames.length !== 3) {
    throw new Error(`need exactly 3 frames, got ${frames.length}`);
  }
  assertSameShape(frames[0], frames[1]);
  assertSameShape(frames[0], frames[2]);
  if (frames[0].dtypeTag !== 1) {
    throw new Error("frame stacking is defined on float32 grids");
  }
  const { height, width, channels } = frames[0];
  const out = new Float32Array(height * width * channels * 3);
  for (let cell = 0; cell < height * width; cell++) {
    for (let s = 0; s < 3; s++) {
      const src = frames[s].data as Float32Array;
      out.set(src.subarray(cell * channels, (cell + 1) * channels),
              cell * channels * 3 + s * channels);
    }
  }
  return { height, width, channels: channels * 3, dtypeTag: 1, data: out };
}
