/**
 * View state and the pure geometry of the annotation canvas.
 *
 * The canvas shows the image scaled by an integer-free zoom factor with a
 * pan offset; seed placement maps canvas positions back to integer image
 * pixels by flooring the inverse transform, so the coordinates sent to the
 * server are exactly the pixels the user pointed at.
 */

export type Tool = "fg-seed" | "bg-seed" | "erase";

export interface LayerVisibility {
  mask: boolean;
  difficulty: boolean;
  seeds: boolean;
}

export interface ViewState {
  tool: Tool;
  overlayOpacity: number;
  layers: LayerVisibility;
  sessionId: string | null;
  revision: number;
}

export function initialViewState(): ViewState {
  return {
    tool: "fg-seed",
    overlayOpacity: 0.45,
    layers: { mask: true, difficulty: false, seeds: true },
    sessionId: null,
    revision: 0,
  };
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface PixelCoord {
  row: number;
  col: number;
}

/** Canvas position -> integer image pixel (floor of the inverse transform). */
export function canvasToImage(
  x: number,
  y: number,
  t: ViewTransform,
  h: number,
  w: number,
): PixelCoord | null {
  const col = Math.floor((x - t.offsetX) / t.scale);
  const row = Math.floor((y - t.offsetY) / t.scale);
  if (row < 0 || row >= h || col < 0 || col >= w) return null;
  return { row, col };
}

/** Top-left canvas position of an image pixel. */
export function imageToCanvas(p: PixelCoord, t: ViewTransform): { x: number; y: number } {
  return { x: p.col * t.scale + t.offsetX, y: p.row * t.scale + t.offsetY };
}

/**
 * Thin a scribble stroke to discrete seed pixels with a minimum spacing
 * (Chebyshev distance) along the stroke, dropping consecutive duplicates.
 */
export function sampleScribble(stroke: PixelCoord[], minSpacing = 3): PixelCoord[] {
  const out: PixelCoord[] = [];
  for (const p of stroke) {
    const last = out[out.length - 1];
    if (!last || Math.max(Math.abs(p.row - last.row), Math.abs(p.col - last.col)) >= minSpacing) {
      out.push(p);
    }
  }
  return out;
}

const key = (p: PixelCoord) => `${p.row},${p.col}`;

/**
 * Local mirror of the server's seed state with optimistic placement:
 * markers appear immediately and are rolled back if the server rejects
 * the request. Within each class the server semantics apply (set union,
 * last write wins across classes).
 */
export class SeedStore {
  private fg = new Map<string, PixelCoord>();
  private bg = new Map<string, PixelCoord>();

  get foreground(): PixelCoord[] {
    return [...this.fg.values()];
  }

  get background(): PixelCoord[] {
    return [...this.bg.values()];
  }

  has(p: PixelCoord): "fg" | "bg" | null {
    if (this.fg.has(key(p))) return "fg";
    if (this.bg.has(key(p))) return "bg";
    return null;
  }

  place(p: PixelCoord, tool: Exclude<Tool, "erase">): void {
    const k = key(p);
    this.fg.delete(k);
    this.bg.delete(k);
    (tool === "fg-seed" ? this.fg : this.bg).set(k, p);
  }

  remove(p: PixelCoord): boolean {
    const k = key(p);
    return this.fg.delete(k) || this.bg.delete(k);
  }

  /** Replace local state from a server snapshot. */
  syncFrom(seeds: { fg: [number, number][]; bg: [number, number][] }): void {
    this.fg.clear();
    this.bg.clear();
    for (const [row, col] of seeds.fg) this.fg.set(`${row},${col}`, { row, col });
    for (const [row, col] of seeds.bg) this.bg.set(`${row},${col}`, { row, col });
  }

  toWire(): { fg: [number, number][]; bg: [number, number][] } {
    return {
      fg: this.foreground.map((p) => [p.row, p.col] as [number, number]),
      bg: this.background.map((p) => [p.row, p.col] as [number, number]),
    };
  }
}
