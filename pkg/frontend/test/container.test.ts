import { describe, expect, it } from "vitest";

import { BlobWriter, buildTrace } from "../src/container.js";

describe("blob layout", () => {
  it("writes tensor blocks byte-exactly", () => {
    const w = new BlobWriter();
    const off = w.writeTensor(new Float32Array([1, 2, 3, 4, 5, 6]), [2, 3]);
    const blob = w.bytes();
    expect(off).toBe(0);
    expect(blob.subarray(0, 8).toString("ascii")).toBe("AR2TENSR");
    expect(blob.readUInt32LE(8)).toBe(2);
    expect(blob.readUInt32LE(12)).toBe(2);
    expect(blob.readUInt32LE(16)).toBe(3);
    expect(blob.readFloatLE(20)).toBe(1);
    expect(blob.readFloatLE(40)).toBe(6);
    expect(blob.length).toBe(8 + 4 + 8 + 24);
  });

  it("packs mask rows MSB-first with byte padding", () => {
    const w = new BlobWriter();
    const mask = new Uint8Array(2 * 10);
    mask[0] = 1; // (0, 0)
    mask[1 * 10 + 9] = 1; // (1, 9)
    w.writeMask(mask, 2, 10);
    const blob = w.bytes();
    expect(blob.subarray(0, 8).toString("ascii")).toBe("AR2MASKB");
    expect(blob.readUInt32LE(8)).toBe(2);
    expect(blob.readUInt32LE(12)).toBe(10);
    const rows = blob.subarray(16);
    expect(rows.length).toBe(4); // two 2-byte rows
    expect(rows[0]).toBe(0b10000000);
    expect(rows[3]).toBe(0b01000000);
  });

  it("rejects dim/payload mismatches", () => {
    const w = new BlobWriter();
    expect(() => w.writeTensor(new Float32Array(5), [2, 3])).toThrow();
  });
});

describe("manifest", () => {
  it("carries the required fields and valid offsets", () => {
    const features = new Float32Array(4 * 4 * 2).fill(0.5);
    const mask = new Uint8Array(16);
    mask[5] = 1;
    const { manifest, blob } = buildTrace(
      [
        {
          frameIndex: 0,
          meanBrightness: 0.4,
          features,
          proposals: [
            { box: [1, 1, 2, 2], mask, identity: new Float32Array([1, 0]), score: 0.9 },
          ],
        },
      ],
      [{ text: "q", embedding: new Float32Array([0, 1, 0]) }],
      { gridHeight: 4, gridWidth: 4, dV: 2, dL: 3 },
      "trace.bin",
      "test"
    );
    const doc = JSON.parse(manifest);
    expect(doc.format_version).toBe(1);
    expect([doc.H, doc.W, doc.d_v, doc.d_l]).toEqual([4, 4, 2, 3]);
    expect(doc.num_frames).toBe(1);
    expect(doc.frames[0].proposal_count).toBe(1);
    const pOff = doc.frames[0].proposal_offsets[0];
    expect(blob.subarray(pOff, pOff + 8).toString("ascii")).toBe("AR2TENSR");
    const fOff = doc.frames[0].feature_offset;
    expect(blob.subarray(fOff, fOff + 8).toString("ascii")).toBe("AR2TENSR");
    expect(blob.readUInt32LE(fOff + 8)).toBe(3); // rank of the feature tensor
  });
});
