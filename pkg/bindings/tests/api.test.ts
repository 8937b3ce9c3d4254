import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterEach, describe, expect, it } from "vitest";

import {
  BoundVolume,
  VktError,
  aggregates,
  applyFilter,
  arithmetic,
  clahe,
  crop,
  deleteSlab,
  fill,
  flip,
  histogram,
  info,
  renderToFile,
  resample,
  rotate,
  scale,
  setExecutionPolicy,
  zoom,
} from "../src/index.js";
import { randomVolume } from "./helpers.js";

const tempDirs: string[] = [];

function tempDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "vkt-api-"));
  tempDirs.push(dir);
  return dir;
}

afterEach(() => {
  setExecutionPolicy({});
  while (tempDirs.length) rmSync(tempDirs.pop()!, { recursive: true, force: true });
});

describe("bound operations", () => {
  it("fill then aggregates reports the filled value", () => {
    const filled = fill(randomVolume([6, 6, 6]), 1.0);
    const report = aggregates(filled);
    expect(report.min).toBe(1);
    expect(report.max).toBe(1);
    expect(report.stddev).toBe(0);
  });

  it("crop cuts the requested box", () => {
    const volume = randomVolume([8, 8, 8], "u8", 5);
    const out = crop(volume, { lower: [2, 2, 2], upper: [6, 7, 8] });
    expect(out.dims).toEqual({ x: 4, y: 5, z: 6 });
    const src = volume.exportCells() as Uint8Array;
    const got = out.exportCells() as Uint8Array;
    // spot-check the first cropped cell: source (2, 2, 2)
    expect(got[0]).toBe(src[2 + 8 * (2 + 8 * 2)]);
  });

  it("out-of-bounds crop raises an error named RangeOutOfBounds", () => {
    const volume = randomVolume([4, 4, 4]);
    let caught: unknown;
    try {
      crop(volume, { lower: [0, 0, 0], upper: [9, 9, 9] });
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(VktError);
    expect((caught as VktError).name).toBe("RangeOutOfBounds");
  });

  it("deleteSlab removes a z-slab", () => {
    const volume = randomVolume([4, 4, 4]);
    const out = deleteSlab(volume, { lower: [0, 0, 1], upper: [4, 4, 3] });
    expect(out.dims).toEqual({ x: 4, y: 4, z: 2 });
  });

  it("resample changes dims, format, and mapping", () => {
    const out = resample(randomVolume([8, 8, 8]), [4, 4, 4], {
      format: "f32",
      range: { lo: 0, hi: 2 },
    });
    expect(out.dims).toEqual({ x: 4, y: 4, z: 4 });
    expect(out.format).toBe("f32");
    expect(out.mapping).toEqual({ lo: 0, hi: 2 });
  });

  it("flip twice is the identity", () => {
    const volume = randomVolume([5, 4, 3], "u16", 9);
    const once = flip(volume, "y");
    expect(once.toBytes().equals(volume.toBytes())).toBe(false);
    expect(flip(once, "y").toBytes().equals(volume.toBytes())).toBe(true);
  });

  it("rotate and scale accept center and roi options", () => {
    const volume = randomVolume([6, 6, 6]);
    const turned = rotate(volume, { axis: [0, 0, 1], angleRad: 0, center: [3, 3, 3] });
    expect(turned.toBytes().equals(volume.toBytes())).toBe(true);
    const stretched = scale(volume, { factors: [1, 1, 1], center: [3, 3, 3] });
    expect(stretched.toBytes().equals(volume.toBytes())).toBe(true);
  });

  it("applyFilter supports explicit kernels", () => {
    const volume = randomVolume([4, 4, 4], "f32", 2);
    const identity = applyFilter(volume, {
      kernelDims: [1, 1, 1],
      weights: [1],
    });
    expect(identity.toBytes().equals(volume.toBytes())).toBe(true);
  });

  it("arithmetic absdiff with itself is zero", () => {
    const volume = randomVolume([4, 4, 4]);
    const out = arithmetic("absdiff", volume, volume);
    expect((out.exportCells() as Uint8Array).every((v) => v === 0)).toBe(true);
  });

  it("histogram mass equals the cell count", () => {
    const report = histogram(randomVolume([6, 6, 6]), 16);
    expect(report.counts.reduce((a, b) => a + b, 0)).toBe(216);
    expect(report.bins).toBe(16);
  });

  it("clahe keeps values inside the mapping range", () => {
    const out = clahe(randomVolume([16, 16, 16], "u8", 13), {
      bricks: [2, 2, 2],
      bins: 64,
      clip: 3,
    });
    const report = aggregates(out);
    expect(report.min).toBeGreaterThanOrEqual(0);
    expect(report.max).toBeLessThanOrEqual(1);
  });

  it("renderToFile writes a PPM image", () => {
    const dir = tempDir();
    const out = join(dir, "img.ppm");
    renderToFile(randomVolume([8, 8, 8]), out, {
      algo: "raymarch",
      lut: [
        [0, 0, 0, 0],
        [1, 0.5, 0.25, 0.9],
      ],
      size: [16, 12],
    });
    expect(existsSync(out)).toBe(true);
    const payload = readFileSync(out);
    expect(payload.subarray(0, 13).toString("ascii")).toBe("P6\n16 12\n255\n");
    expect(payload.byteLength).toBe(13 + 16 * 12 * 3);
  });

  it("zoom resamples a cropped region to a cell budget", () => {
    const out = zoom(randomVolume([16, 16, 16]), { lower: [4, 4, 4], upper: [12, 12, 12] }, 512);
    expect(out.kind).toBe("structured");
    const d = out.dims;
    expect(Math.abs(d.x * d.y * d.z - 512)).toBeLessThanOrEqual(3 * 8 * 8 + 1);
    expect(out.format).toBe("f32");
  });

  it("info reports the volume type", () => {
    const report = info(randomVolume([3, 3, 3]));
    expect(report.kind).toBe("structured");
    expect(report.raw).toContain("dims: 3x3x3");
  });

  it("execution policy flags pass through", () => {
    setExecutionPolicy({ device: "emulated", workers: 2 });
    const filled = fill(randomVolume([4, 4, 4]), 0.5);
    expect(aggregates(filled).stddev).toBe(0);
  });
});
