/**
 * Export pipeline: raw clip -> engine-compatible trace container.
 *
 * Detections happen in pixel space and are then quantized onto the feature
 * grid the engine sees (masks by cell coverage, boxes from the quantized
 * mask's bounds), so features, masks, and boxes all share one extent.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { buildTrace } from "./container.js";
import { EncoderSuite, ReferenceEncoders } from "./encoders.js";
import { readClip } from "./video.js";
import { AdapterConfig, DEFAULT_CONFIG, Detection, FrameOut, ProposalOut, RgbFrame } from "./types.js";

export function loadConfig(configPath?: string): AdapterConfig {
  if (!configPath) return { ...DEFAULT_CONFIG };
  const doc = JSON.parse(fs.readFileSync(configPath, "utf-8"));
  const cfg = { ...DEFAULT_CONFIG, ...doc };
  if (cfg.frameStride < 1) throw new Error("frameStride must be >= 1");
  if (cfg.cropMargin < 0) throw new Error("cropMargin must be >= 0");
  return cfg;
}

function quantizeToGrid(det: Detection, frame: RgbFrame, cfg: AdapterConfig): ProposalOut | null {
  const { gridHeight: gh, gridWidth: gw } = cfg;
  const cellH = frame.height / gh;
  const cellW = frame.width / gw;
  const mask = new Uint8Array(gh * gw);
  let best = -1;
  let bestCover = 0;
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      const y0 = Math.floor(gr * cellH);
      const y1 = Math.max(y0 + 1, Math.floor((gr + 1) * cellH));
      const x0 = Math.floor(gc * cellW);
      const x1 = Math.max(x0 + 1, Math.floor((gc + 1) * cellW));
      let covered = 0;
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          if (det.mask[y * frame.width + x]) covered++;
        }
      }
      const frac = covered / ((y1 - y0) * (x1 - x0));
      if (frac >= 0.15) mask[gr * gw + gc] = 1;
      if (frac > bestCover) {
        bestCover = frac;
        best = gr * gw + gc;
      }
    }
  }
  if (bestCover === 0) return null;
  if (!mask.some((v) => v)) mask[best] = 1; // keep at least the best-covered cell

  let minR = gh;
  let maxR = -1;
  let minC = gw;
  let maxC = -1;
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      if (!mask[gr * gw + gc]) continue;
      if (gr < minR) minR = gr;
      if (gr > maxR) maxR = gr;
      if (gc < minC) minC = gc;
      if (gc > maxC) maxC = gc;
    }
  }
  return {
    box: [minC, minR, maxC + 1, maxR + 1],
    mask,
    identity: new Float32Array(0), // filled by the caller
    score: det.score,
  };
}

export function meanBrightness(frame: RgbFrame): number {
  let acc = 0;
  const n = frame.width * frame.height;
  for (let i = 0; i < n; i++) {
    acc +=
      0.299 * frame.pixels[3 * i] + 0.587 * frame.pixels[3 * i + 1] + 0.114 * frame.pixels[3 * i + 2];
  }
  return acc / n / 255;
}

export interface ExportResult {
  framesWritten: number;
  proposalsWritten: number;
  manifestPath: string;
}

export function exportTrace(
  videoDir: string,
  queries: string[],
  outDir: string,
  cfg: AdapterConfig = DEFAULT_CONFIG,
  encoders?: EncoderSuite
): ExportResult {
  const frames = readClip(videoDir, cfg.frameStride);
  const suite = encoders ?? new ReferenceEncoders(cfg, frames);

  const out: FrameOut[] = [];
  let proposalsWritten = 0;
  frames.forEach((frame, index) => {
    const proposals: ProposalOut[] = [];
    for (const det of suite.detect(frame)) {
      const quantized = quantizeToGrid(det, frame, cfg);
      if (!quantized) continue;
      quantized.identity = suite.identityEmbedding(frame, det);
      proposals.push(quantized);
    }
    proposalsWritten += proposals.length;
    out.push({
      frameIndex: index,
      meanBrightness: meanBrightness(frame),
      features: suite.featureGrid(frame),
      proposals,
    });
  });

  const trace = buildTrace(
    out,
    queries.map((text) => ({ text, embedding: suite.textEmbedding(text) })),
    { gridHeight: cfg.gridHeight, gridWidth: cfg.gridWidth, dV: cfg.dV, dL: cfg.dL },
    "trace.bin",
    `reference encoders, mulberry32 seed ${cfg.seed}`
  );
  fs.mkdirSync(outDir, { recursive: true });
  const manifestPath = path.join(outDir, "trace.json");
  fs.writeFileSync(manifestPath, trace.manifest);
  fs.writeFileSync(path.join(outDir, "trace.bin"), trace.blob);
  return { framesWritten: out.length, proposalsWritten, manifestPath };
}
