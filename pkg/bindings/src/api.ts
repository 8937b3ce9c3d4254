/**
 * The bound operation surface.
 *
 * Each function serializes its volume to native bytes, pipes them
 * through the corresponding `vkt` subcommand, and wraps the output
 * bytes again, so results are identical to driving the CLI by hand.
 */

import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runVkt } from "./cli.js";
import { DataFormatName, ValueRange, Vec3 } from "./format.js";
import { BoundVolume } from "./volume.js";

/** Half-open cell box, lower inclusive, upper exclusive. */
export interface Roi {
  lower: [number, number, number];
  upper: [number, number, number];
}

function roiFlags(roi?: Roi): string[] {
  if (!roi) return [];
  return ["--roi", ...roi.lower.map(String), ...roi.upper.map(String)];
}

function pipe(args: string[], volume: BoundVolume): BoundVolume {
  return BoundVolume.fromBytes(runVkt(args, volume.toBytes()));
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "vkt-bindings-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export function fill(volume: BoundVolume, value: number, roi?: Roi): BoundVolume {
  return pipe(["fill", "--value", String(value), ...roiFlags(roi)], volume);
}

export const fillRange = (volume: BoundVolume, roi: Roi, value: number): BoundVolume =>
  fill(volume, value, roi);

export function crop(volume: BoundVolume, roi: Roi): BoundVolume {
  return pipe(["crop", ...roiFlags(roi)], volume);
}

/** Remove a slab spanning the full extent on exactly two axes. */
export function deleteSlab(volume: BoundVolume, roi: Roi): BoundVolume {
  return pipe(["delete", ...roiFlags(roi)], volume);
}

export interface ResampleOptions {
  format?: DataFormatName;
  range?: ValueRange;
}

export function resample(
  volume: BoundVolume,
  dims: [number, number, number],
  options: ResampleOptions = {},
): BoundVolume {
  const args = ["resample", "--dims", ...dims.map(String)];
  if (options.format) args.push("--format", options.format);
  if (options.range) args.push("--range", String(options.range.lo), String(options.range.hi));
  return pipe(args, volume);
}

export function flip(volume: BoundVolume, axis: "x" | "y" | "z"): BoundVolume {
  return pipe(["flip", "--axis", axis], volume);
}

export interface RotateOptions {
  axis: [number, number, number];
  angleRad: number;
  center?: [number, number, number];
  roi?: Roi;
}

export function rotate(volume: BoundVolume, options: RotateOptions): BoundVolume {
  const args = [
    "rotate",
    "--axis", ...options.axis.map(String),
    "--angle", String(options.angleRad),
  ];
  if (options.center) args.push("--center", ...options.center.map(String));
  args.push(...roiFlags(options.roi));
  return pipe(args, volume);
}

export interface ScaleOptions {
  factors: [number, number, number];
  center?: [number, number, number];
  roi?: Roi;
}

export function scale(volume: BoundVolume, options: ScaleOptions): BoundVolume {
  const args = ["scale", "--factors", ...options.factors.map(String)];
  if (options.center) args.push("--center", ...options.center.map(String));
  args.push(...roiFlags(options.roi));
  return pipe(args, volume);
}

export type FilterOptions =
  | { gaussian: number; ksize?: number }
  | { kernelDims: [number, number, number]; weights: number[] };

export function applyFilter(volume: BoundVolume, options: FilterOptions): BoundVolume {
  if ("gaussian" in options) {
    const args = ["filter", "--gaussian", String(options.gaussian)];
    if (options.ksize) args.push("--ksize", String(options.ksize));
    return pipe(args, volume);
  }
  return withTempDir((dir) => {
    const path = join(dir, "kernel.txt");
    writeFileSync(path, `${options.kernelDims.join(" ")}\n${options.weights.join(" ")}\n`);
    return pipe(["filter", "--kernel-file", path], volume);
  });
}

export interface ClaheOptions {
  bricks: [number, number, number];
  bins?: number;
  clip?: number;
}

export function clahe(volume: BoundVolume, options: ClaheOptions): BoundVolume {
  const args = ["clahe", "--bricks", ...options.bricks.map(String)];
  if (options.bins !== undefined) args.push("--bins", String(options.bins));
  if (options.clip !== undefined) {
    args.push("--clip", Number.isFinite(options.clip) ? String(options.clip) : "inf");
  }
  return pipe(args, volume);
}

export type ArithmeticOp = "sum" | "diff" | "prod" | "quot" | "absdiff";

export function arithmetic(
  op: ArithmeticOp,
  a: BoundVolume,
  b: BoundVolume,
  roi?: Roi,
): BoundVolume {
  return withTempDir((dir) => {
    const path = join(dir, "b.vkt");
    b.save(path);
    return pipe(["arith", "--op", op, "--with", path, ...roiFlags(roi)], a);
  });
}

export interface AggregatesReport {
  min: number;
  max: number;
  argmin: Vec3;
  argmax: Vec3;
  mean: number;
  stddev: number;
  /** Raw text report, byte-equal to the CLI's output. */
  raw: string;
}

function parseVec(line: string): Vec3 {
  const [x, y, z] = line.trim().split(/\s+/).map(Number);
  return { x, y, z };
}

export function aggregates(volume: BoundVolume, roi?: Roi): AggregatesReport {
  const raw = runVkt(["aggregates", ...roiFlags(roi)], volume.toBytes()).toString();
  const fields = new Map<string, string>();
  for (const line of raw.trim().split("\n")) {
    const idx = line.indexOf(": ");
    fields.set(line.slice(0, idx), line.slice(idx + 2));
  }
  return {
    min: Number(fields.get("min")),
    max: Number(fields.get("max")),
    argmin: parseVec(fields.get("argmin") ?? ""),
    argmax: parseVec(fields.get("argmax") ?? ""),
    mean: Number(fields.get("mean")),
    stddev: Number(fields.get("stddev")),
    raw,
  };
}

export interface HistogramReport {
  bins: number;
  range: ValueRange;
  counts: number[];
  total: number;
  raw: string;
}

export function histogram(volume: BoundVolume, bins: number, roi?: Roi): HistogramReport {
  const raw = runVkt(
    ["histogram", "--bins", String(bins), ...roiFlags(roi)],
    volume.toBytes(),
  ).toString();
  const lines = raw.trim().split("\n");
  const get = (key: string) =>
    lines.find((l) => l.startsWith(key + ": "))?.slice(key.length + 2) ?? "";
  const [lo, hi] = get("range").split(/\s+/).map(Number);
  return {
    bins: Number(get("bins")),
    range: { lo, hi },
    counts: get("counts").split(/\s+/).map(Number),
    total: Number(get("total")),
    raw,
  };
}

export interface RenderOptions {
  algo?: "raymarch" | "iso" | "pathtrace";
  /** Rows of RGBA tuples forming the transfer function. */
  lut: number[][];
  size?: [number, number];
  eye?: [number, number, number];
  center?: [number, number, number];
  up?: [number, number, number];
  fovy?: number;
  spp?: number;
  seed?: number;
  dtRate?: number;
  iso?: number[];
  densityScale?: number;
  maxBounces?: number;
  background?: [number, number, number];
  range?: ValueRange;
  imageFormat?: "ppm" | "pfm";
}

/** Render to an image file on disk (PPM or PFM by extension). */
export function renderToFile(volume: BoundVolume, outPath: string, options: RenderOptions): void {
  withTempDir((dir) => {
    const lutPath = join(dir, "lut.txt");
    writeFileSync(lutPath, options.lut.map((row) => row.join(" ")).join("\n") + "\n");
    const args = ["render", "--lut", lutPath, "-o", outPath];
    if (options.algo) args.push("--algo", options.algo);
    if (options.size) args.push("--size", ...options.size.map(String));
    if (options.eye) args.push("--eye", ...options.eye.map(String));
    if (options.center) args.push("--center", ...options.center.map(String));
    if (options.up) args.push("--up", ...options.up.map(String));
    if (options.fovy !== undefined) args.push("--fovy", String(options.fovy));
    if (options.spp !== undefined) args.push("--spp", String(options.spp));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    if (options.dtRate !== undefined) args.push("--dt-rate", String(options.dtRate));
    if (options.iso) args.push("--iso", ...options.iso.map(String));
    if (options.densityScale !== undefined) args.push("--density-scale", String(options.densityScale));
    if (options.maxBounces !== undefined) args.push("--max-bounces", String(options.maxBounces));
    if (options.background) args.push("--background", ...options.background.map(String));
    if (options.range) args.push("--range", String(options.range.lo), String(options.range.hi));
    if (options.imageFormat) args.push("--image-format", options.imageFormat);
    runVkt(args, volume.toBytes());
  });
}

/** Crop a region and resample it to a total cell budget. */
export function zoom(
  volume: BoundVolume,
  roi: Roi,
  cells: number,
  format: DataFormatName = "f32",
): BoundVolume {
  return pipe(
    ["zoom", ...roiFlags(roi), "--cells", String(cells), "--format", format],
    volume,
  );
}

export interface InfoReport {
  kind: "structured" | "hierarchical";
  raw: string;
}

export function info(volume: BoundVolume): InfoReport {
  const raw = runVkt(["info"], volume.toBytes()).toString();
  return { kind: raw.includes("type: structured") ? "structured" : "hierarchical", raw };
}
