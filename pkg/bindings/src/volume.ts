/** Volume wrappers with typed-array cell access. */

import { readFileSync, writeFileSync } from "node:fs";
import os from "node:os";

import { VktError } from "./errors.js";
import {
  BYTES_PER_CELL,
  DataFormatName,
  HierarchicalHeader,
  StructuredHeader,
  ValueRange,
  Vec3,
  VolumeHeader,
  cellCount,
  decodeVolume,
  encodeVolume,
} from "./format.js";

export type CellArray = Uint8Array | Uint16Array | Float32Array;

// Cell buffers are little-endian; typed-array views assume the host
// matches, which every supported Node platform does.
if (os.endianness() !== "LE") {
  throw new Error("vkt bindings require a little-endian host");
}

function vec3(v: Vec3 | [number, number, number]): Vec3 {
  return Array.isArray(v) ? { x: v[0], y: v[1], z: v[2] } : { ...v };
}

/**
 * An immutable-by-convention wrapper around one volume file image.
 *
 * Cell data is exposed as a contiguous typed array in x-fastest order
 * (index `i + dims.x * (j + dims.y * k)`), matching the on-disk layout;
 * exports are copies, never views into internal state.
 */
export class BoundVolume {
  private constructor(
    private readonly header: VolumeHeader,
    private payload: Buffer,
  ) {}

  /** Allocate a zero-filled structured volume. */
  static create(
    dims: Vec3 | [number, number, number],
    format: DataFormatName,
    cellSize: Vec3 | [number, number, number] = [1, 1, 1],
    mapping: ValueRange = { lo: 0, hi: 1 },
  ): BoundVolume {
    const header: StructuredHeader = {
      kind: "structured",
      dims: vec3(dims),
      format,
      cellSize: vec3(cellSize),
      mapping: { ...mapping },
    };
    if (header.dims.x < 1 || header.dims.y < 1 || header.dims.z < 1) {
      throw new VktError("InvalidArgument", `dims must be >= 1 per axis`);
    }
    const payload = Buffer.alloc(cellCount(header.dims) * BYTES_PER_CELL[format]);
    return new BoundVolume(header, payload);
  }

  static fromBytes(file: Buffer): BoundVolume {
    const { header, payload } = decodeVolume(file);
    return new BoundVolume(header, payload);
  }

  static load(path: string): BoundVolume {
    return BoundVolume.fromBytes(readFileSync(path));
  }

  toBytes(): Buffer {
    return encodeVolume(this.header, this.payload);
  }

  save(path: string): void {
    writeFileSync(path, this.toBytes());
  }

  get kind(): "structured" | "hierarchical" {
    return this.header.kind;
  }

  private structured(): StructuredHeader {
    if (this.header.kind !== "structured") {
      throw new VktError("InvalidArgument", "operation needs a structured volume");
    }
    return this.header;
  }

  get dims(): Vec3 {
    return { ...this.structured().dims };
  }

  get format(): DataFormatName {
    return this.structured().format;
  }

  get cellSize(): Vec3 {
    return { ...this.structured().cellSize };
  }

  get mapping(): ValueRange {
    if (this.header.kind === "structured") return { ...this.header.mapping };
    return { ...(this.header as HierarchicalHeader).mapping };
  }

  get cellCount(): number {
    return cellCount(this.structured().dims);
  }

  /** Copy of the raw cells in their native element width. */
  exportCells(): CellArray {
    const header = this.structured();
    const copy = Buffer.from(this.payload);
    const view = copy.buffer.slice(copy.byteOffset, copy.byteOffset + copy.byteLength);
    switch (header.format) {
      case "u8":
        return new Uint8Array(view);
      case "u16":
        return new Uint16Array(view);
      case "f32":
        return new Float32Array(view);
    }
  }

  /** Replace the raw cells; the array length must match exactly. */
  importCells(cells: CellArray): void {
    const header = this.structured();
    const expected = cellCount(header.dims);
    if (cells.length !== expected) {
      throw new VktError(
        "SizeMismatch",
        `cell array holds ${cells.length} elements, volume needs ${expected}`,
      );
    }
    const width = BYTES_PER_CELL[header.format];
    if (cells.BYTES_PER_ELEMENT !== width) {
      throw new VktError(
        "InvalidArgument",
        `cell array element width ${cells.BYTES_PER_ELEMENT} does not match format ${header.format}`,
      );
    }
    this.payload = Buffer.from(cells.buffer.slice(cells.byteOffset, cells.byteOffset + cells.byteLength));
  }
}
