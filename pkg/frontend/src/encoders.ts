/**
 * Reference encoder suite.
 *
 * Every encoder here is a deterministic, dependency-free stand-in with the
 * same shape as the real thing (dense feature extractor, class-agnostic
 * detector, box-to-mask segmenter, crop identity embedder, text embedder).
 * Model-backed implementations can replace any of them by implementing
 * EncoderSuite; the export pipeline and the on-disk format do not change.
 */
import { l2normalize, randomMatrix } from "./prng.js";
import { AdapterConfig, Detection, RgbFrame } from "./types.js";

export interface EncoderSuite {
  /** dense per-cell features on the configured grid */
  featureGrid(frame: RgbFrame): Float32Array;
  /** class-agnostic moving-object proposals in pixel space */
  detect(frame: RgbFrame): Detection[];
  /** identity embedding for one detection (uses a crop with margin) */
  identityEmbedding(frame: RgbFrame, det: Detection): Float32Array;
  /** query text embedding */
  textEmbedding(text: string): Float32Array;
}

export function buildBackground(frames: RgbFrame[], maxSamples = 25): Uint8Array {
  const step = Math.max(1, Math.floor(frames.length / maxSamples));
  const sampled = frames.filter((_, i) => i % step === 0);
  const n = frames[0].pixels.length;
  const out = new Uint8Array(n);
  const column = new Uint8Array(sampled.length);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < sampled.length; j++) column[j] = sampled[j].pixels[i];
    const sorted = Array.from(column).sort((a, b) => a - b);
    out[i] = sorted[(sorted.length - 1) >> 1];
  }
  return out;
}

export class ReferenceEncoders implements EncoderSuite {
  private featProj: Float64Array; // 6 stats -> dV
  private idProj: Float64Array; // 64 histogram bins -> dId
  private background: Uint8Array;

  constructor(private cfg: AdapterConfig, frames: RgbFrame[]) {
    this.featProj = randomMatrix(cfg.seed * 1000 + 1, 6, cfg.dV);
    this.idProj = randomMatrix(cfg.seed * 1000 + 2, 64, cfg.dId);
    this.background = buildBackground(frames);
  }

  featureGrid(frame: RgbFrame): Float32Array {
    const { gridHeight: gh, gridWidth: gw, dV } = this.cfg;
    const out = new Float32Array(gh * gw * dV);
    const cellH = frame.height / gh;
    const cellW = frame.width / gw;
    const stats = new Float64Array(6);
    for (let gr = 0; gr < gh; gr++) {
      for (let gc = 0; gc < gw; gc++) {
        const y0 = Math.floor(gr * cellH);
        const y1 = Math.max(y0 + 1, Math.floor((gr + 1) * cellH));
        const x0 = Math.floor(gc * cellW);
        const x1 = Math.max(x0 + 1, Math.floor((gc + 1) * cellW));
        stats.fill(0);
        let n = 0;
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) {
            const i = 3 * (y * frame.width + x);
            for (let ch = 0; ch < 3; ch++) {
              const v = frame.pixels[i + ch] / 255;
              stats[ch] += v;
              stats[3 + ch] += v * v;
            }
            n++;
          }
        }
        for (let ch = 0; ch < 3; ch++) {
          const mean = stats[ch] / n;
          stats[ch] = mean;
          stats[3 + ch] = Math.sqrt(Math.max(0, stats[3 + ch] / n - mean * mean));
        }
        const base = (gr * gw + gc) * dV;
        for (let d = 0; d < dV; d++) {
          let acc = 0;
          for (let s = 0; s < 6; s++) acc += stats[s] * this.featProj[s * dV + d];
          out[base + d] = acc;
        }
      }
    }
    return out;
  }

  detect(frame: RgbFrame): Detection[] {
    const { width, height } = frame;
    const fg = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
      const d =
        Math.abs(frame.pixels[3 * i] - this.background[3 * i]) +
        Math.abs(frame.pixels[3 * i + 1] - this.background[3 * i + 1]) +
        Math.abs(frame.pixels[3 * i + 2] - this.background[3 * i + 2]);
      fg[i] = d / 3 > this.cfg.diffThreshold ? 1 : 0;
    }

    const labels = new Int32Array(width * height).fill(-1);
    const detections: Detection[] = [];
    const queue = new Int32Array(width * height);
    let next = 0;
    for (let start = 0; start < width * height; start++) {
      if (!fg[start] || labels[start] >= 0) continue;
      // BFS flood fill, 4-connected
      let head = 0;
      let tail = 0;
      queue[tail++] = start;
      labels[start] = next;
      let minX = width;
      let minY = height;
      let maxX = -1;
      let maxY = -1;
      let area = 0;
      let diffSum = 0;
      const mask = new Uint8Array(width * height);
      while (head < tail) {
        const p = queue[head++];
        const y = Math.floor(p / width);
        const x = p - y * width;
        mask[p] = 1;
        area++;
        diffSum += Math.abs(frame.pixels[3 * p] - this.background[3 * p]);
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
        const neighbors = [p - 1, p + 1, p - width, p + width];
        for (let k = 0; k < 4; k++) {
          const q = neighbors[k];
          if (q < 0 || q >= width * height) continue;
          // left/right must stay on the same row
          if (k < 2 && Math.floor(q / width) !== y) continue;
          if (fg[q] && labels[q] < 0) {
            labels[q] = next;
            queue[tail++] = q;
          }
        }
      }
      if (area >= this.cfg.minAreaPx) {
        detections.push({
          x0: minX,
          y0: minY,
          x1: maxX + 1,
          y1: maxY + 1,
          mask,
          score: Math.min(1, diffSum / area / 128 + 0.5),
        });
        next++;
      }
    }
    return detections;
  }

  identityEmbedding(frame: RgbFrame, det: Detection): Float32Array {
    const m = this.cfg.cropMargin;
    const x0 = Math.max(0, det.x0 - m);
    const y0 = Math.max(0, det.y0 - m);
    const x1 = Math.min(frame.width, det.x1 + m);
    const y1 = Math.min(frame.height, det.y1 + m);
    // 4x4x4 RGB histogram over the crop, masked pixels double-weighted
    const hist = new Float64Array(64);
    for (let y = y0; y < y1; y++) {
      for (let x = x0; x < x1; x++) {
        const p = y * frame.width + x;
        const bin =
          16 * (frame.pixels[3 * p] >> 6) +
          4 * (frame.pixels[3 * p + 1] >> 6) +
          (frame.pixels[3 * p + 2] >> 6);
        hist[bin] += det.mask[p] ? 2 : 1;
      }
    }
    const out = new Float64Array(this.cfg.dId);
    for (let d = 0; d < this.cfg.dId; d++) {
      let acc = 0;
      for (let b = 0; b < 64; b++) acc += hist[b] * this.idProj[b * this.cfg.dId + d];
      out[d] = acc;
    }
    return Float32Array.from(l2normalize(out));
  }

  textEmbedding(text: string): Float32Array {
    const out = new Float64Array(this.cfg.dL);
    const tokens = text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean);
    if (tokens.length === 0) tokens.push("empty");
    for (const token of tokens) {
      let h = 2166136261 ^ this.cfg.seed;
      for (const ch of token) {
        h = Math.imul(h ^ ch.charCodeAt(0), 16777619) >>> 0;
      }
      const vec = randomMatrix(h, 1, this.cfg.dL);
      for (let d = 0; d < this.cfg.dL; d++) out[d] += vec[d];
    }
    return Float32Array.from(l2normalize(out));
  }
}
