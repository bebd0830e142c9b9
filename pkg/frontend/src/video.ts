/**
 * Frame sources. A "clip" is a directory of binary PPM (P6) frames named
 * frame_NNNN.ppm: trivially decodable, no codec dependencies, and any real
 * footage converts to it with one ffmpeg call.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { mulberry32 } from "./prng.js";
import { RgbFrame } from "./types.js";

export function encodePpm(frame: RgbFrame): Buffer {
  const header = Buffer.from(`P6\n${frame.width} ${frame.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(frame.pixels)]);
}

export function decodePpm(buf: Buffer): RgbFrame {
  if (buf[0] !== 0x50 || buf[1] !== 0x36) {
    throw new Error("not a binary PPM (P6) file");
  }
  // header: magic, width, height, maxval as whitespace-separated tokens
  // (comment lines allowed), then a single whitespace before the payload
  let pos = 2;
  const tokens: number[] = [];
  while (tokens.length < 3) {
    while (pos < buf.length && isSpace(buf[pos])) pos++;
    if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    tokens.push(parseInt(buf.subarray(start, pos).toString("ascii"), 10));
  }
  pos++; // the single whitespace after maxval
  const [width, height, maxval] = tokens;
  if (maxval !== 255) throw new Error(`unsupported PPM maxval ${maxval}`);
  const expected = width * height * 3;
  const pixels = new Uint8Array(buf.subarray(pos, pos + expected));
  if (pixels.length !== expected) throw new Error("truncated PPM payload");
  return { width, height, pixels };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x0a || b === 0x0d || b === 0x09;
}

export function readClip(dir: string, stride = 1): RgbFrame[] {
  const names = fs
    .readdirSync(dir)
    .filter((n) => n.endsWith(".ppm"))
    .sort();
  if (names.length === 0) throw new Error(`no .ppm frames in ${dir}`);
  const frames: RgbFrame[] = [];
  for (let i = 0; i < names.length; i += stride) {
    frames.push(decodePpm(fs.readFileSync(path.join(dir, names[i]))));
  }
  const { width, height } = frames[0];
  for (const f of frames) {
    if (f.width !== width || f.height !== height) {
      throw new Error("clip violates the fixed-view contract: frame extents differ");
    }
  }
  return frames;
}

/**
 * Synthetic test clip: a static scene with a bright block, plus a moving
 * blob that leaves and re-enters. Deterministic per seed.
 */
export function makeClip(
  dir: string,
  numFrames: number,
  seed = 1,
  width = 128,
  height = 128
): void {
  fs.mkdirSync(dir, { recursive: true });
  const rand = mulberry32(seed);
  const baseR = 40 + Math.floor(rand() * 40);
  const baseG = 40 + Math.floor(rand() * 40);
  const baseB = 40 + Math.floor(rand() * 40);

  const background = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    background[3 * i] = baseR;
    background[3 * i + 1] = baseG;
    background[3 * i + 2] = baseB;
  }
  // bright static block: a persistent structure for the engine's bank
  const block = { x0: Math.floor(width * 0.55), y0: Math.floor(height * 0.2), w: Math.floor(width * 0.3), h: Math.floor(height * 0.35) };
  for (let y = block.y0; y < block.y0 + block.h; y++) {
    for (let x = block.x0; x < block.x0 + block.w; x++) {
      const i = y * width + x;
      background[3 * i] = 210;
      background[3 * i + 1] = 200;
      background[3 * i + 2] = 120;
    }
  }

  const blobRadius = Math.max(5, Math.floor(width * 0.06));
  for (let t = 0; t < numFrames; t++) {
    const pixels = new Uint8Array(background);
    const visible = t % 20 < 14; // periodic absence
    if (visible) {
      const cx = block.x0 + block.w / 2 + Math.cos(t * 0.25) * block.w * 0.6;
      const cy = block.y0 + block.h / 2 + Math.sin(t * 0.2) * block.h * 0.6;
      for (let y = Math.max(0, Math.floor(cy - blobRadius)); y < Math.min(height, cy + blobRadius); y++) {
        for (let x = Math.max(0, Math.floor(cx - blobRadius)); x < Math.min(width, cx + blobRadius); x++) {
          const dx = x - cx;
          const dy = y - cy;
          if (dx * dx + dy * dy <= blobRadius * blobRadius) {
            const i = y * width + x;
            pixels[3 * i] = 220;
            pixels[3 * i + 1] = 60;
            pixels[3 * i + 2] = 60;
          }
        }
      }
    }
    const name = `frame_${String(t).padStart(4, "0")}.ppm`;
    fs.writeFileSync(path.join(dir, name), encodePpm({ width, height, pixels }));
  }
}
