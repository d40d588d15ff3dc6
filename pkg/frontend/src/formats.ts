/**
 * Readers and writers for the toolkit's serialized formats.
 *
 * - grid container `.bevg`: 16-byte header (magic "BEVG", u16 height,
 *   u16 width, u16 channels, u16 dtype tag, u32 reserved) followed by the
 *   row-major little-endian payload; tag 1 = float32, tag 2 = float64.
 * - cloud `.bin`: consecutive little-endian float32 (x, y, z, intensity)
 *   quadruples.
 * - epoch plan: text lines `iter det_idx sem_idx mot_idx flip rot_deg dropout`.
 *
 * Typed arrays are used directly, so a little-endian host is assumed (the
 * same assumption the wire formats make).
 */

import * as fs from "node:fs";

export const BEVG_MAGIC = "BEVG";
export const BEVG_HEADER_BYTES = 16;
export const POINT_RECORD_BYTES = 16;

export interface Grid {
  height: number;
  width: number;
  channels: number;
  dtypeTag: number;
  /** Row-major height x width x channels payload. */
  data: Float32Array | Float64Array;
}

function copyAligned(view: Uint8Array): ArrayBuffer {
  const bytes = new Uint8Array(view.length);
  bytes.set(view);
  return bytes.buffer;
}

export function readBevg(path: string): Grid {
  const buf = fs.readFileSync(path);
  if (buf.length < BEVG_HEADER_BYTES) {
    throw new Error(`${path}: shorter than the 16-byte header`);
  }
  if (buf.toString("ascii", 0, 4) !== BEVG_MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const height = buf.readUInt16LE(4);
  const width = buf.readUInt16LE(6);
  const channels = buf.readUInt16LE(8);
  const dtypeTag = buf.readUInt16LE(10);
  if (dtypeTag !== 1 && dtypeTag !== 2) {
    throw new Error(`${path}: unknown dtype tag ${dtypeTag}`);
  }
  const count = height * width * channels;
  const itemBytes = dtypeTag === 1 ? 4 : 8;
  if (buf.length !== BEVG_HEADER_BYTES + count * itemBytes) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const payload = copyAligned(buf.subarray(BEVG_HEADER_BYTES));
  const data = dtypeTag === 1 ? new Float32Array(payload) : new Float64Array(payload);
  return { height, width, channels, dtypeTag, data };
}

export function writeBevg(path: string, grid: Grid): void {
  const expected = grid.height * grid.width * grid.channels;
  if (grid.data.length !== expected) {
    throw new Error(`payload has ${grid.data.length} values, expected ${expected}`);
  }
  const header = Buffer.alloc(BEVG_HEADER_BYTES);
  header.write(BEVG_MAGIC, 0, "ascii");
  header.writeUInt16LE(grid.height, 4);
  header.writeUInt16LE(grid.width, 6);
  header.writeUInt16LE(grid.channels, 8);
  header.writeUInt16LE(grid.dtypeTag, 10);
  header.writeUInt32LE(0, 12);
  const payload = Buffer.from(grid.data.buffer, grid.data.byteOffset, grid.data.byteLength);
  fs.writeFileSync(path, Buffer.concat([header, payload]));
}

/** Read a cloud file into a flat n*4 Float32Array (x, y, z, intensity rows). */
export function readCloudBin(path: string): Float32Array {
  const buf = fs.readFileSync(path);
  if (buf.length % POINT_RECORD_BYTES !== 0) {
    throw new Error(`${path}: ${buf.length} bytes is not a whole number of points`);
  }
  return new Float32Array(copyAligned(buf));
}

export function writeCloudBin(path: string, points: Float32Array): void {
  if (points.length % 4 !== 0) {
    throw new Error(`point buffer length ${points.length} is not a multiple of 4`);
  }
  fs.writeFileSync(path, Buffer.from(points.buffer, points.byteOffset, points.byteLength));
}

/** Flatten n x 4 rows into the Float32Array layout used by the cloud format. */
export function pointsFromRows(rows: ArrayLike<number>[]): Float32Array {
  const out = new Float32Array(rows.length * 4);
  for (let i = 0; i < rows.length; i++) {
    const row = rows[i];
    if (row.length !== 4) {
      throw new Error(`row ${i} has ${row.length} fields, expected 4`);
    }
    out.set(row as ArrayLike<number>, i * 4);
  }
  return out;
}

export interface PlanRow {
  iteration: number;
  detIdx: number;
  semIdx: number;
  motIdx: number;
  flip: number;
  rotDeg: number;
  dropout: number;
}

/** Lazily yield epoch-plan rows from the line-oriented text format. */
export function* iterPlanRows(path: string): Generator<PlanRow> {
  const text = fs.readFileSync(path, "ascii");
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const fields = line.trim().split(/\s+/);
    if (fields.length !== 7) {
      throw new Error(`plan line has ${fields.length} fields, expected 7: ${line}`);
    }
    yield {
      iteration: parseInt(fields[0], 10),
      detIdx: parseInt(fields[1], 10),
      semIdx: parseInt(fields[2], 10),
      motIdx: parseInt(fields[3], 10),
      flip: parseInt(fields[4], 10),
      rotDeg: parseFloat(fields[5]),
      dropout: parseFloat(fields[6]),
    };
  }
}

export function loadPlan(path: string): PlanRow[] {
  return Array.from(iterPlanRows(path));
}
