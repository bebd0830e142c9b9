/**
 * Trace container writer, byte-compatible with the engine's reader.
 *
 * Blob blocks (little-endian):
 *   tensor: "AR2TENSR" + u32 rank + u32 dims[rank] + f32 payload
 *   mask:   "AR2MASKB" + u32 height + u32 width + packed rows
 *           (bits MSB-first, each row padded to a byte boundary)
 */
import { FrameOut } from "./types.js";

const MAGIC_TENSOR = Buffer.from("AR2TENSR", "ascii");
const MAGIC_MASK = Buffer.from("AR2MASKB", "ascii");

export class BlobWriter {
  private chunks: Buffer[] = [];
  private offset = 0;

  get size(): number {
    return this.offset;
  }

  private push(buf: Buffer): void {
    this.chunks.push(buf);
    this.offset += buf.length;
  }

  writeTensor(values: Float32Array | number[], dims: number[]): number {
    const start = this.offset;
    const count = dims.reduce((a, b) => a * b, 1);
    if (count !== values.length) {
      throw new Error(`tensor payload ${values.length} != prod(dims) ${count}`);
    }
    const header = Buffer.alloc(8 + 4 + 4 * dims.length);
    MAGIC_TENSOR.copy(header, 0);
    header.writeUInt32LE(dims.length, 8);
    dims.forEach((d, i) => header.writeUInt32LE(d, 12 + 4 * i));
    this.push(header);
    const payload = Buffer.alloc(4 * count);
    for (let i = 0; i < count; i++) payload.writeFloatLE(values[i] as number, 4 * i);
    this.push(payload);
    return start;
  }

  /** mask: row-major 0/1 bytes, length height * width */
  writeMask(mask: Uint8Array, height: number, width: number): number {
    const start = this.offset;
    const header = Buffer.alloc(16);
    MAGIC_MASK.copy(header, 0);
    header.writeUInt32LE(height, 8);
    header.writeUInt32LE(width, 12);
    this.push(header);
    const rowBytes = Math.ceil(width / 8);
    const rows = Buffer.alloc(height * rowBytes);
    for (let r = 0; r < height; r++) {
      for (let c = 0; c < width; c++) {
        if (mask[r * width + c]) {
          rows[r * rowBytes + (c >> 3)] |= 0x80 >> (c & 7);
        }
      }
    }
    this.push(rows);
    return start;
  }

  bytes(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

export interface TraceFiles {
  manifest: string;
  blob: Buffer;
}

export function buildTrace(
  frames: FrameOut[],
  queries: { text: string; embedding: Float32Array }[],
  extent: { gridHeight: number; gridWidth: number; dV: number; dL: number },
  blobName: string,
  prng: string
): TraceFiles {
  const writer = new BlobWriter();
  const queryRecords = queries.map((q) => ({
    text: q.text,
    embedding_offset: writer.writeTensor(q.embedding, [q.embedding.length]),
  }));

  const frameRecords = frames.map((f) => {
    const offsets: number[] = [];
    for (const p of f.proposals) {
      const header = new Float32Array([p.box[0], p.box[1], p.box[2], p.box[3], p.score]);
      offsets.push(writer.writeTensor(header, [5]));
      writer.writeMask(p.mask, extent.gridHeight, extent.gridWidth);
      writer.writeTensor(p.identity, [p.identity.length]);
    }
    return {
      frame_index: f.frameIndex,
      mean_brightness: f.meanBrightness,
      feature_offset: writer.writeTensor(f.features, [
        extent.gridHeight,
        extent.gridWidth,
        extent.dV,
      ]),
      proposal_count: f.proposals.length,
      proposal_offsets: offsets,
    };
  });

  const manifest = {
    format_version: 1,
    H: extent.gridHeight,
    W: extent.gridWidth,
    d_v: extent.dV,
    d_l: extent.dL,
    num_frames: frames.length,
    blob: blobName,
    prng,
    queries: queryRecords,
    frames: frameRecords,
  };
  return { manifest: JSON.stringify(manifest, null, 1) + "\n", blob: writer.bytes() };
}
