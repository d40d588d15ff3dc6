/**
 * Cross-boundary equivalence: every bound operation must reproduce the
 * native core's output, bitwise where the native contract is bitwise.
 * Expected artifacts are generated by the core in-process
 * (scripts/gen_fixtures.py); the bindings recompute them through the CLI
 * and the serialized formats.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import {
  BevOptions,
  DensifyOptions,
  bindDensify,
  bindRasterize,
  densifyDir,
  loadPlan,
  pseudoResidual,
  rasterizeDir,
  readBevg,
  readCloudBin,
  stackMotionFrames,
} from "../src/index";

const FIXTURES = path.join(__dirname, "..", ".fixtures");
const GEN = path.join(__dirname, "..", "scripts", "gen_fixtures.py");

let nCases: number;
let bevOptions: BevOptions;
let densifyOptions: DensifyOptions;

function grids(file: string) {
  return readBevg(path.join(FIXTURES, file));
}

function bytes(file: string): Buffer {
  return fs.readFileSync(path.join(FIXTURES, file));
}

beforeAll(() => {
  fs.rmSync(FIXTURES, { recursive: true, force: true });
  execFileSync("python3", [GEN, FIXTURES], { stdio: "inherit" });
  const meta = JSON.parse(fs.readFileSync(path.join(FIXTURES, "meta.json"), "utf-8"));
  nCases = meta.n_cases;
  bevOptions = {
    xMin: meta.bev.x_min, xMax: meta.bev.x_max,
    yMin: meta.bev.y_min, yMax: meta.bev.y_max,
    rX: meta.bev.r_x, rY: meta.bev.r_y,
  };
  densifyOptions = {
    deltaRMin: meta.densify.delta_r_min,
    deltaRMax: meta.densify.delta_r_max,
    copiesPerPoint: meta.densify.copies_per_point,
    seed: meta.densify_seed,
  };
});

describe("cross-boundary equivalence", () => {
  it("rasterize matches native outputs bitwise on all fuzz cases", () => {
    const outDir = fs.mkdtempSync(path.join(os.tmpdir(), "bind-raster-"));
    rasterizeDir(path.join(FIXTURES, "clouds"), outDir, bevOptions);
    for (let c = 0; c < nCases; c++) {
      const name = `case_${String(c).padStart(3, "0")}`;
      const got = fs.readFileSync(path.join(outDir, `${name}.bevg`));
      expect(got.equals(bytes(path.join("rasters", `${name}.bevg`))),
             `${name} differs`).toBe(true);
    }
    fs.rmSync(outDir, { recursive: true, force: true });
  });

  it("densify matches native outputs byte-for-byte on all fuzz cases", () => {
    const outDir = fs.mkdtempSync(path.join(os.tmpdir(), "bind-dense-"));
    densifyDir(path.join(FIXTURES, "clouds"), outDir, densifyOptions);
    for (let c = 0; c < nCases; c++) {
      const name = `case_${String(c).padStart(3, "0")}.bin`;
      const got = fs.readFileSync(path.join(outDir, name));
      expect(got.equals(bytes(path.join("dense", name))), `${name} differs`).toBe(true);
    }
    fs.rmSync(outDir, { recursive: true, force: true });
  });

  it("per-array rasterize binding matches native grids", () => {
    for (let c = 0; c < 4; c++) {
      const name = `case_${String(c).padStart(3, "0")}`;
      const points = readCloudBin(path.join(FIXTURES, "clouds", `${name}.bin`));
      const grid = bindRasterize(points, bevOptions);
      const expected = grids(path.join("rasters", `${name}.bevg`));
      expect(grid.height).toBe(expected.height);
      expect(grid.width).toBe(expected.width);
      expect(grid.channels).toBe(expected.channels);
      expect(Buffer.from(grid.data.buffer).equals(
        Buffer.from(expected.data.buffer))).toBe(true);
    }
  });

  it("per-array densify binding matches native clouds", () => {
    for (let c = 0; c < 4; c++) {
      const name = `case_${String(c).padStart(3, "0")}.bin`;
      const points = readCloudBin(path.join(FIXTURES, "clouds", name));
      const grown = bindDensify(points, densifyOptions);
      const expected = readCloudBin(path.join(FIXTURES, "dense", name));
      expect(grown.length).toBe(expected.length);
      expect(Buffer.from(grown.buffer).equals(Buffer.from(expected.buffer))).toBe(true);
    }
  });

  it("zero-growth densify duplicates the input points", () => {
    const points = readCloudBin(path.join(FIXTURES, "clouds", "case_000.bin"));
    const grown = bindDensify(points, { deltaRMin: 0, deltaRMax: 0, seed: 1 });
    expect(grown.length).toBe(points.length * 2);
    expect(Array.from(grown.subarray(0, points.length)))
      .toEqual(Array.from(points));
    expect(Array.from(grown.subarray(points.length)))
      .toEqual(Array.from(points));
  });

  it("pseudo-residual reproduces the native float32 subtraction bitwise", () => {
    const a = grids(path.join("rasters", "case_000.bevg"));
    const b = grids(path.join("rasters", "case_001.bevg"));
    const expected = grids("residual.bevg");
    const got = pseudoResidual(b, a);
    expect(Buffer.from(got.data.buffer).equals(
      Buffer.from(expected.data.buffer))).toBe(true);
  });

  it("frame stacking reproduces the native channel concatenation bitwise", () => {
    const frames = [0, 1, 2].map((c) =>
      grids(path.join("rasters", `case_00${c}.bevg`)));
    const expected = grids("stack.bevg");
    const got = stackMotionFrames(frames);
    expect(got.channels).toBe(frames[0].channels * 3);
    expect(Buffer.from(got.data.buffer).equals(
      Buffer.from(expected.data.buffer))).toBe(true);
  });

  it("plan iterator reproduces the plan file row-exactly", () => {
    const rows = loadPlan(path.join(FIXTURES, "plan.txt"));
    const expected = JSON.parse(
      fs.readFileSync(path.join(FIXTURES, "plan_rows.json"), "utf-8"));
    expect(rows.length).toBe(expected.length);
    for (let i = 0; i < rows.length; i++) {
      expect(rows[i].iteration).toBe(expected[i].iteration);
      expect(rows[i].detIdx).toBe(expected[i].det_idx);
      expect(rows[i].semIdx).toBe(expected[i].sem_idx);
      expect(rows[i].motIdx).toBe(expected[i].mot_idx);
      expect(rows[i].flip).toBe(expected[i].flip);
      expect(rows[i].rotDeg).toBe(expected[i].rot_deg);
      expect(rows[i].dropout).toBe(expected[i].dropout);
    }
  });
});
