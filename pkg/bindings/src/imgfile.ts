/**
 * The service's native binary grid format (.img), little-endian:
 *
 *   magic "TEXK" | version u8 | domain u8 | flags u8 (bit0: spacing) | pad u8
 *   width u32 | height u32 | [spacing 2 x f64] | data h*w float32 row-major
 */

export type PixelDomain = "raw" | "hounsfield" | "normalized";

const DOMAIN_TAGS: Record<PixelDomain, number> = { raw: 0, hounsfield: 1, normalized: 2 };
const TAG_DOMAINS: PixelDomain[] = ["raw", "hounsfield", "normalized"];
const MAGIC = "TEXK";

export interface GridFile {
  data: number[][];
  domain: PixelDomain;
  spacing?: [number, number];
}

export function encodeImg(grid: GridFile): Buffer {
  const height = grid.data.length;
  const width = height > 0 ? grid.data[0].length : 0;
  if (height === 0 || width === 0 || grid.data.some((row) => row.length !== width)) {
    throw new Error("texture-loss: grid must be a non-empty rectangular 2-D array");
  }
  const hasSpacing = grid.spacing !== undefined;
  const buf = Buffer.alloc(16 + (hasSpacing ? 16 : 0) + width * height * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(1, 4);
  buf.writeUInt8(DOMAIN_TAGS[grid.domain], 5);
  buf.writeUInt8(hasSpacing ? 1 : 0, 6);
  buf.writeUInt8(0, 7);
  buf.writeUInt32LE(width, 8);
  buf.writeUInt32LE(height, 12);
  let offset = 16;
  if (grid.spacing !== undefined) {
    buf.writeDoubleLE(grid.spacing[0], offset);
    buf.writeDoubleLE(grid.spacing[1], offset + 8);
    offset += 16;
  }
  for (const row of grid.data) {
    for (const value of row) {
      buf.writeFloatLE(value, offset);
      offset += 4;
    }
  }
  return buf;
}

export function decodeImg(buf: Buffer): GridFile {
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("texture-loss: not a native grid file");
  }
  const tag = buf.readUInt8(5);
  const flags = buf.readUInt8(6);
  const width = buf.readUInt32LE(8);
  const height = buf.readUInt32LE(12);
  let offset = 16;
  let spacing: [number, number] | undefined;
  if (flags & 1) {
    spacing = [buf.readDoubleLE(offset), buf.readDoubleLE(offset + 8)];
    offset += 16;
  }
  if (buf.length - offset !== width * height * 4) {
    throw new Error("texture-loss: truncated grid file");
  }
  const data: number[][] = [];
  for (let r = 0; r < height; r++) {
    const row: number[] = new Array(width);
    for (let c = 0; c < width; c++) {
      row[c] = buf.readFloatLE(offset);
      offset += 4;
    }
    data.push(row);
  }
  const domain = TAG_DOMAINS[tag];
  if (domain === undefined) {
    throw new Error(`texture-loss: unknown domain tag ${tag}`);
  }
  return spacing === undefined ? { data, domain } : { data, domain, spacing };
}
