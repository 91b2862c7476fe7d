/**
 * Wire-format codecs shared with the segmentation service.
 *
 * Masks travel as run-length-encoded JSON over row-major pixels, runs
 * alternating and starting with a zero-run. Difficulty maps travel as
 * base64 of the float raster format (magic "RSEGIMG1\n", ASCII "H W\n"
 * header, little-endian float32 payload).
 */

export interface RleMask {
  h: number;
  w: number;
  rle: number[];
}

export interface FloatRaster {
  h: number;
  w: number;
  values: Float32Array;
}

const IMAGE_MAGIC = "RSEGIMG1\n";

/** Decode a run-length mask into a flat boolean array (row-major). */
export function decodeRleMask(mask: RleMask): Uint8Array {
  const total = mask.h * mask.w;
  const sum = mask.rle.reduce((a, b) => a + b, 0);
  if (sum !== total) {
    throw new Error(`rle runs sum to ${sum}, expected ${total}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of mask.rle) {
    if (value) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return out;
}

/** Encode a flat boolean array to run-length form (zero-run first). */
export function encodeRleMask(bits: Uint8Array, h: number, w: number): RleMask {
  if (bits.length !== h * w) {
    throw new Error(`mask has ${bits.length} pixels, expected ${h * w}`);
  }
  const rle: number[] = [];
  let value = 0;
  let run = 0;
  for (let i = 0; i < bits.length; i++) {
    const bit = bits[i] ? 1 : 0;
    if (bit === value) {
      run += 1;
    } else {
      rle.push(run);
      value = bit;
      run = 1;
    }
  }
  if (bits.length > 0) rle.push(run);
  return { h, w, rle };
}

function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // Node fallback for tests
  return new Uint8Array(Buffer.from(b64, "base64"));
}

/** Decode a base64 float raster (the difficulty-map payload). */
export function decodeFloatRaster(b64: string): FloatRaster {
  const bytes = base64ToBytes(b64);
  const magic = new TextDecoder().decode(bytes.subarray(0, IMAGE_MAGIC.length));
  if (magic !== IMAGE_MAGIC) {
    throw new Error(`expected float raster magic, got ${JSON.stringify(magic)}`);
  }
  let end = IMAGE_MAGIC.length;
  while (end < bytes.length && bytes[end] !== 0x0a) end++;
  if (end >= bytes.length) throw new Error("missing raster header line");
  const header = new TextDecoder().decode(bytes.subarray(IMAGE_MAGIC.length, end));
  const parts = header.trim().split(/\s+/).map(Number);
  if (parts.length !== 2 || parts.some((v) => !Number.isInteger(v) || v < 1)) {
    throw new Error(`malformed raster dimensions ${JSON.stringify(header)}`);
  }
  const [h, w] = parts;
  const payload = bytes.subarray(end + 1);
  if (payload.length !== h * w * 4) {
    throw new Error(`raster payload has ${payload.length} bytes, expected ${h * w * 4}`);
  }
  // Copy to guarantee 4-byte alignment for the Float32Array view.
  const aligned = new Uint8Array(payload.length);
  aligned.set(payload);
  return { h, w, values: new Float32Array(aligned.buffer) };
}

/** Encode a grayscale image ([0,1] floats) as the float raster upload format. */
export function encodeFloatRaster(values: Float32Array, h: number, w: number): Uint8Array {
  if (values.length !== h * w) {
    throw new Error(`image has ${values.length} pixels, expected ${h * w}`);
  }
  const headerText = `${IMAGE_MAGIC}${h} ${w}\n`;
  const header = new TextEncoder().encode(headerText);
  const out = new Uint8Array(header.length + values.length * 4);
  out.set(header);
  out.set(new Uint8Array(values.buffer, values.byteOffset, values.length * 4), header.length);
  return out;
}
