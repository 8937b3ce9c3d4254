import { execFileSync } from "node:child_process";

import { BoundVolume, DataFormatName, vktBinary } from "../src/index.js";

/** Deterministic 32-bit PRNG so fixtures are stable across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomVolume(
  dims: [number, number, number],
  format: DataFormatName = "u8",
  seed = 7,
): BoundVolume {
  const volume = BoundVolume.create(dims, format);
  const rand = mulberry32(seed);
  const n = dims[0] * dims[1] * dims[2];
  if (format === "f32") {
    const cells = new Float32Array(n);
    for (let i = 0; i < n; i++) cells[i] = rand();
    volume.importCells(cells);
  } else if (format === "u16") {
    const cells = new Uint16Array(n);
    for (let i = 0; i < n; i++) cells[i] = Math.floor(rand() * 65536);
    volume.importCells(cells);
  } else {
    const cells = new Uint8Array(n);
    for (let i = 0; i < n; i++) cells[i] = Math.floor(rand() * 256);
    volume.importCells(cells);
  }
  return volume;
}

/** Drive the CLI directly (no bindings) for cross-interface comparisons. */
export function rawCli(args: string[], input?: Buffer): Buffer {
  return execFileSync(vktBinary(), args, { input, maxBuffer: 1 << 30 });
}
