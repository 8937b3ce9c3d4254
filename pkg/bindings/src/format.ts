/**
 * The native volume container format (magic `VKTVOL01`).
 *
 * All multi-byte fields are little-endian. Structured payloads are raw
 * cell bytes laid out x-fastest, then y, then z; hierarchical payloads
 * are the subgrids' float32 cells concatenated in header order.
 */

import { VktError } from "./errors.js";

export const MAGIC = "VKTVOL01";
const MAGIC_BYTES = Buffer.from(MAGIC, "ascii");

export type DataFormatName = "u8" | "u16" | "f32";

export const BYTES_PER_CELL: Record<DataFormatName, number> = {
  u8: 1,
  u16: 2,
  f32: 4,
};

const FORMAT_CODES: Record<DataFormatName, number> = { u8: 1, u16: 2, f32: 3 };
const CODE_TO_FORMAT: Record<number, DataFormatName> = { 1: "u8", 2: "u16", 3: "f32" };

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface ValueRange {
  lo: number;
  hi: number;
}

export interface StructuredHeader {
  kind: "structured";
  dims: Vec3;
  format: DataFormatName;
  cellSize: Vec3;
  mapping: ValueRange;
}

export interface SubgridMeta {
  level: number;
  lowerLogical: Vec3;
  dimsCells: Vec3;
}

export interface HierarchicalHeader {
  kind: "hierarchical";
  mapping: ValueRange;
  subgrids: SubgridMeta[];
}

export type VolumeHeader = StructuredHeader | HierarchicalHeader;

export const STRUCTURED_HEADER_SIZE = 8 + 1 + 12 + 1 + 12 + 8; // 42 bytes

export function cellCount(dims: Vec3): number {
  return dims.x * dims.y * dims.z;
}

export function payloadByteLength(header: VolumeHeader): number {
  if (header.kind === "structured") {
    return cellCount(header.dims) * BYTES_PER_CELL[header.format];
  }
  return header.subgrids.reduce((acc, sg) => acc + cellCount(sg.dimsCells) * 4, 0);
}

/** Serialize header + payload into one file image. */
export function encodeVolume(header: VolumeHeader, payload: Buffer): Buffer {
  const expected = payloadByteLength(header);
  if (payload.byteLength !== expected) {
    throw new VktError(
      "SizeMismatch",
      `payload holds ${payload.byteLength} bytes, header implies ${expected}`,
    );
  }
  if (header.kind === "structured") {
    const head = Buffer.alloc(STRUCTURED_HEADER_SIZE);
    MAGIC_BYTES.copy(head, 0);
    head.writeUInt8(0, 8);
    head.writeUInt32LE(header.dims.x, 9);
    head.writeUInt32LE(header.dims.y, 13);
    head.writeUInt32LE(header.dims.z, 17);
    head.writeUInt8(FORMAT_CODES[header.format], 21);
    head.writeFloatLE(header.cellSize.x, 22);
    head.writeFloatLE(header.cellSize.y, 26);
    head.writeFloatLE(header.cellSize.z, 30);
    head.writeFloatLE(header.mapping.lo, 34);
    head.writeFloatLE(header.mapping.hi, 38);
    return Buffer.concat([head, payload]);
  }
  const head = Buffer.alloc(8 + 1 + 8 + 4 + header.subgrids.length * 28);
  MAGIC_BYTES.copy(head, 0);
  head.writeUInt8(1, 8);
  head.writeFloatLE(header.mapping.lo, 9);
  head.writeFloatLE(header.mapping.hi, 13);
  head.writeUInt32LE(header.subgrids.length, 17);
  let off = 21;
  for (const sg of header.subgrids) {
    head.writeInt32LE(sg.lowerLogical.x, off);
    head.writeInt32LE(sg.lowerLogical.y, off + 4);
    head.writeInt32LE(sg.lowerLogical.z, off + 8);
    head.writeUInt32LE(sg.dimsCells.x, off + 12);
    head.writeUInt32LE(sg.dimsCells.y, off + 16);
    head.writeUInt32LE(sg.dimsCells.z, off + 20);
    head.writeUInt32LE(sg.level, off + 24);
    off += 28;
  }
  return Buffer.concat([head, payload]);
}

function need(buf: Buffer, upTo: number, what: string): void {
  if (buf.byteLength < upTo) {
    throw new VktError(
      "TruncatedPayload",
      `expected at least ${upTo} bytes for ${what}, got ${buf.byteLength}`,
    );
  }
}

/** Parse a file image into header + payload (payload is a copy). */
export function decodeVolume(file: Buffer): { header: VolumeHeader; payload: Buffer } {
  need(file, 9, "volume header");
  if (!file.subarray(0, 8).equals(MAGIC_BYTES)) {
    throw new VktError("BadMagic", `expected ${MAGIC}, got ${file.subarray(0, 8).toString("latin1")}`);
  }
  const kind = file.readUInt8(8);
  if (kind === 0) {
    need(file, STRUCTURED_HEADER_SIZE, "structured header");
    const code = file.readUInt8(21);
    const format = CODE_TO_FORMAT[code];
    if (!format) {
      throw new VktError("UnknownFormatCode", `unknown data format code ${code}`);
    }
    const header: StructuredHeader = {
      kind: "structured",
      dims: { x: file.readUInt32LE(9), y: file.readUInt32LE(13), z: file.readUInt32LE(17) },
      format,
      cellSize: { x: file.readFloatLE(22), y: file.readFloatLE(26), z: file.readFloatLE(30) },
      mapping: { lo: file.readFloatLE(34), hi: file.readFloatLE(38) },
    };
    const end = STRUCTURED_HEADER_SIZE + payloadByteLength(header);
    need(file, end, "cell payload");
    return { header, payload: Buffer.from(file.subarray(STRUCTURED_HEADER_SIZE, end)) };
  }
  if (kind === 1) {
    need(file, 21, "hierarchical header");
    const count = file.readUInt32LE(17);
    need(file, 21 + count * 28, "subgrid metadata");
    const subgrids: SubgridMeta[] = [];
    let off = 21;
    for (let i = 0; i < count; i++) {
      subgrids.push({
        lowerLogical: {
          x: file.readInt32LE(off),
          y: file.readInt32LE(off + 4),
          z: file.readInt32LE(off + 8),
        },
        dimsCells: {
          x: file.readUInt32LE(off + 12),
          y: file.readUInt32LE(off + 16),
          z: file.readUInt32LE(off + 20),
        },
        level: file.readUInt32LE(off + 24),
      });
      off += 28;
    }
    const header: HierarchicalHeader = {
      kind: "hierarchical",
      mapping: { lo: file.readFloatLE(9), hi: file.readFloatLE(13) },
      subgrids,
    };
    const end = off + payloadByteLength(header);
    need(file, end, "subgrid payload");
    return { header, payload: Buffer.from(file.subarray(off, end)) };
  }
  throw new VktError("UnknownFormatCode", `unknown volume type ${kind}`);
}
