/**
 * Pure pixel compositing for the annotation view.
 *
 * Overlays are exact renderings of the last server payload: a pixel gets
 * mask/difficulty color if and only if the decoded payload marks it. The
 * composite is produced as an RGBA buffer so it can be verified without a
 * canvas and blitted with putImageData.
 */
import type { PixelCoord } from "./state.js";

export interface CompositeInput {
  h: number;
  w: number;
  /** grayscale image in [0,1], row-major */
  image: Float32Array;
  /** 0/1 mask bits, row-major (or null when the layer is hidden/absent) */
  mask: Uint8Array | null;
  /** difficulty values in [0,1] (or null) */
  difficulty: Float32Array | null;
  /** overlay alpha in [0,1] for mask and difficulty layers */
  opacity: number;
}

export const MASK_COLOR: [number, number, number] = [64, 200, 80];
export const DIFFICULTY_COLOR: [number, number, number] = [255, 80, 0];
export const FG_SEED_COLOR: [number, number, number] = [40, 120, 255];
export const BG_SEED_COLOR: [number, number, number] = [255, 60, 60];

/** Gray base plus alpha-blended mask and difficulty-heat layers. */
export function composite(input: CompositeInput): Uint8ClampedArray {
  const { h, w, image, mask, difficulty, opacity } = input;
  const out = new Uint8ClampedArray(h * w * 4);
  for (let i = 0; i < h * w; i++) {
    const gray = Math.round(Math.min(1, Math.max(0, image[i])) * 255);
    let r = gray;
    let g = gray;
    let b = gray;
    if (mask && mask[i]) {
      r = r * (1 - opacity) + MASK_COLOR[0] * opacity;
      g = g * (1 - opacity) + MASK_COLOR[1] * opacity;
      b = b * (1 - opacity) + MASK_COLOR[2] * opacity;
    }
    if (difficulty && difficulty[i] > 0) {
      const a = opacity * Math.min(1, Math.max(0, difficulty[i]));
      r = r * (1 - a) + DIFFICULTY_COLOR[0] * a;
      g = g * (1 - a) + DIFFICULTY_COLOR[1] * a;
      b = b * (1 - a) + DIFFICULTY_COLOR[2] * a;
    }
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = 255;
  }
  return out;
}

/**
 * RGBA layer that is transparent everywhere except mask pixels; used both
 * for rendering and for asserting that the overlay equals the payload.
 */
export function maskLayer(
  mask: Uint8Array,
  h: number,
  w: number,
  color: [number, number, number] = MASK_COLOR,
  alpha = 255,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(h * w * 4);
  for (let i = 0; i < h * w; i++) {
    if (mask[i]) {
      out[4 * i] = color[0];
      out[4 * i + 1] = color[1];
      out[4 * i + 2] = color[2];
      out[4 * i + 3] = alpha;
    }
  }
  return out;
}

/** Pixels an RGBA layer actually paints (alpha > 0), row-major indices. */
export function paintedPixels(layer: Uint8ClampedArray): Set<number> {
  const out = new Set<number>();
  for (let i = 3; i < layer.length; i += 4) {
    if (layer[i] > 0) out.add((i - 3) / 4);
  }
  return out;
}

/** Cross-shaped seed markers stamped into an RGBA buffer (in place). */
export function stampSeedMarkers(
  buffer: Uint8ClampedArray,
  h: number,
  w: number,
  seeds: PixelCoord[],
  color: [number, number, number],
  arm = 1,
): void {
  for (const { row, col } of seeds) {
    for (let d = -arm; d <= arm; d++) {
      for (const [r, c] of [
        [row + d, col],
        [row, col + d],
      ]) {
        if (r >= 0 && r < h && c >= 0 && c < w) {
          const i = 4 * (r * w + c);
          buffer[i] = color[0];
          buffer[i + 1] = color[1];
          buffer[i + 2] = color[2];
          buffer[i + 3] = 255;
        }
      }
    }
  }
}
