/** Raw decoded frame: tightly packed RGB, row-major. */
export interface RgbFrame {
  width: number;
  height: number;
  /** length = width * height * 3 */
  pixels: Uint8Array;
}

export interface AdapterConfig {
  /** feature grid extent the engine will see */
  gridHeight: number;
  gridWidth: number;
  /** feature channels per grid cell */
  dV: number;
  /** text embedding dimension */
  dL: number;
  /** identity embedding dimension */
  dId: number;
  /** keep every Nth input frame */
  frameStride: number;
  /** pixels of context around a detection box fed to the identity encoder */
  cropMargin: number;
  /** mean |frame - background| (0..255) above which a pixel is foreground */
  diffThreshold: number;
  /** reject components smaller than this many pixels */
  minAreaPx: number;
  /** seed for the fixed projection matrices */
  seed: number;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  gridHeight: 32,
  gridWidth: 32,
  dV: 16,
  dL: 32,
  dId: 32,
  frameStride: 1,
  cropMargin: 8,
  diffThreshold: 18,
  minAreaPx: 24,
  seed: 7,
};

/** Pixel-space detection produced by the reference detector. */
export interface Detection {
  /** half-open pixel box [x0, x1) x [y0, y1) */
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  /** pixel-space foreground mask of the whole frame for this component */
  mask: Uint8Array;
  score: number;
}

/** Grid-space proposal ready for serialization. */
export interface ProposalOut {
  box: [number, number, number, number];
  /** bool grid, length gridHeight * gridWidth */
  mask: Uint8Array;
  identity: Float32Array;
  score: number;
}

export interface FrameOut {
  frameIndex: number;
  meanBrightness: number;
  features: Float32Array; // gridHeight * gridWidth * dV
  proposals: ProposalOut[];
}
