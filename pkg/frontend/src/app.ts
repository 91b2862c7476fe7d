/**
 * DOM wiring for the annotation UI: load slice images, view overlays,
 * scribble or click seeds, trigger refinement, and step through slices.
 *
 * All pixel math lives in state.ts/overlay.ts; this module only moves data
 * between the DOM, the session API, and those pure helpers.
 */
import { SessionClient, ApiError, MetricsJson } from "./api.js";
import { decodeFloatRaster, decodeRleMask } from "./codec.js";
import {
  composite,
  FG_SEED_COLOR,
  BG_SEED_COLOR,
  stampSeedMarkers,
} from "./overlay.js";
import {
  canvasToImage,
  initialViewState,
  sampleScribble,
  SeedStore,
  Tool,
  ViewTransform,
  PixelCoord,
} from "./state.js";

interface SliceSession {
  sessionId: string;
  h: number;
  w: number;
  image: Float32Array;
  mask: Uint8Array;
  difficulty: Float32Array;
  seeds: SeedStore;
  revision: number;
  metrics: MetricsJson | null;
}

const state = initialViewState();
const client = new SessionClient(
  (window as { REFINESEG_API?: string }).REFINESEG_API ?? "http://127.0.0.1:8000",
);

let sliceFiles: { name: string; bytes: Uint8Array }[] = [];
let sessions: (SliceSession | null)[] = [];
let currentSlice = 0;
let busy = false;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const toastBox = document.getElementById("toast")!;
const statusBox = document.getElementById("status")!;

function toast(message: string): void {
  toastBox.textContent = message;
  toastBox.classList.add("visible");
  setTimeout(() => toastBox.classList.remove("visible"), 4000);
}

function transform(session: SliceSession): ViewTransform {
  const scale = Math.max(1, Math.floor(Math.min(canvas.width / session.w, canvas.height / session.h)));
  return { scale, offsetX: 0, offsetY: 0 };
}

function render(): void {
  const session = sessions[currentSlice];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!session) {
    statusBox.textContent = sliceFiles.length
      ? `slice ${currentSlice + 1}/${sliceFiles.length}: not loaded`
      : "no slices loaded";
    return;
  }
  const { h, w } = session;
  const buffer = composite({
    h,
    w,
    image: session.image,
    mask: state.layers.mask ? session.mask : null,
    difficulty: state.layers.difficulty ? session.difficulty : null,
    opacity: state.overlayOpacity,
  });
  if (state.layers.seeds) {
    stampSeedMarkers(buffer, h, w, session.seeds.foreground, FG_SEED_COLOR);
    stampSeedMarkers(buffer, h, w, session.seeds.background, BG_SEED_COLOR);
  }
  const t = transform(session);
  const small = new ImageData(new Uint8ClampedArray(buffer), w, h);
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d")!.putImageData(small, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, w * t.scale, h * t.scale);
  const metricsText = session.metrics
    ? ` | dice ${session.metrics.dice.toFixed(3)} sen ${session.metrics.sen.toFixed(3)} ppv ${session.metrics.ppv.toFixed(3)}`
    : "";
  statusBox.textContent =
    `slice ${currentSlice + 1}/${sliceFiles.length} | session ${session.sessionId.slice(0, 8)} ` +
    `| revision ${session.revision}${metricsText}`;
}

async function ensureSession(index: number): Promise<SliceSession | null> {
  if (sessions[index]) return sessions[index];
  const file = sliceFiles[index];
  if (!file) return null;
  try {
    const created = await client.createSession(file.bytes, file.name);
    const difficulty = decodeFloatRaster(created.difficulty_map);
    // the uploaded raster doubles as the display image
    const image = decodeUploadedImage(file.bytes, created.h, created.w);
    sessions[index] = {
      sessionId: created.session_id,
      h: created.h,
      w: created.w,
      image,
      mask: decodeRleMask(created.initial_mask),
      difficulty: difficulty.values,
      seeds: new SeedStore(),
      revision: created.revision,
      metrics: null,
    };
    state.sessionId = created.session_id;
    state.revision = created.revision;
    return sessions[index];
  } catch (err) {
    toast(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
    return null;
  }
}

function decodeUploadedImage(bytes: Uint8Array, h: number, w: number): Float32Array {
  const text = new TextDecoder().decode(bytes.subarray(0, 9));
  if (text === "RSEGIMG1\n") {
    let end = 9;
    while (bytes[end] !== 0x0a) end++;
    const aligned = new Uint8Array(bytes.length - end - 1);
    aligned.set(bytes.subarray(end + 1));
    return new Float32Array(aligned.buffer);
  }
  // 8-bit PGM: find the third header token, then normalize the payload
  let pos = 2;
  let tokens = 0;
  while (tokens < 3) {
    while (bytes[pos] === 0x20 || bytes[pos] === 0x0a || bytes[pos] === 0x0d || bytes[pos] === 0x09) pos++;
    if (bytes[pos] === 0x23) {
      while (bytes[pos] !== 0x0a) pos++;
      continue;
    }
    while (pos < bytes.length && bytes[pos] !== 0x20 && bytes[pos] !== 0x0a && bytes[pos] !== 0x0d && bytes[pos] !== 0x09) pos++;
    tokens++;
  }
  pos++;
  const out = new Float32Array(h * w);
  for (let i = 0; i < h * w; i++) out[i] = bytes[pos + i] / 255;
  return out;
}

async function applySeedDelta(session: SliceSession, delta: { fg?: [number, number][]; bg?: [number, number][] }): Promise<void> {
  const revision = await client.addSeeds(session.sessionId, delta);
  session.revision = revision;
  state.revision = revision;
}

async function placeSeeds(points: PixelCoord[], tool: Tool): Promise<void> {
  const session = sessions[currentSlice];
  if (!session || busy || points.length === 0) return;
  busy = true;
  const previous = session.seeds.toWire();
  try {
    if (tool === "erase") {
      const removed = points.filter((p) => session.seeds.remove(p));
      if (removed.length) {
        render();
        const revision = await client.addSeeds(session.sessionId, {
          replace: true,
          ...session.seeds.toWire(),
        });
        session.revision = revision;
        state.revision = revision;
      }
    } else {
      for (const p of points) session.seeds.place(p, tool);
      render();
      const wire = points.map((p) => [p.row, p.col] as [number, number]);
      await applySeedDelta(session, tool === "fg-seed" ? { fg: wire } : { bg: wire });
    }
  } catch (err) {
    session.seeds.syncFrom(previous); // roll back optimistic markers
    toast(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
  } finally {
    busy = false;
    render();
  }
}

async function refineAndRender(): Promise<void> {
  const session = sessions[currentSlice];
  if (!session || busy) return;
  busy = true;
  try {
    const result = await client.refine(session.sessionId);
    session.mask = decodeRleMask(result.refined_mask);
    session.difficulty = decodeFloatRaster(result.difficulty_map).values;
    session.revision = result.revision;
    session.metrics = result.metrics ?? null;
    state.revision = result.revision;
  } catch (err) {
    toast(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
  } finally {
    busy = false;
    render();
  }
}

function strokePoints(events: { x: number; y: number }[], session: SliceSession): PixelCoord[] {
  const t = transform(session);
  const pixels: PixelCoord[] = [];
  for (const e of events) {
    const p = canvasToImage(e.x, e.y, t, session.h, session.w);
    if (p) pixels.push(p);
  }
  return sampleScribble(pixels);
}

function bindUi(): void {
  const fileInput = document.getElementById("slices") as HTMLInputElement;
  fileInput.addEventListener("change", async () => {
    const files = [...(fileInput.files ?? [])];
    sliceFiles = await Promise.all(
      files.map(async (f) => ({ name: f.name, bytes: new Uint8Array(await f.arrayBuffer()) })),
    );
    sessions = sliceFiles.map(() => null);
    currentSlice = 0;
    await ensureSession(0);
    render();
  });

  for (const tool of ["fg-seed", "bg-seed", "erase"] as Tool[]) {
    document.getElementById(`tool-${tool}`)!.addEventListener("click", () => {
      state.tool = tool;
      document
        .querySelectorAll(".tool")
        .forEach((el) => el.classList.toggle("active", el.id === `tool-${tool}`));
    });
  }

  (document.getElementById("opacity") as HTMLInputElement).addEventListener("input", (e) => {
    state.overlayOpacity = Number((e.target as HTMLInputElement).value);
    render();
  });
  for (const layer of ["mask", "difficulty", "seeds"] as const) {
    (document.getElementById(`layer-${layer}`) as HTMLInputElement).addEventListener(
      "change",
      (e) => {
        state.layers[layer] = (e.target as HTMLInputElement).checked;
        render();
      },
    );
  }

  document.getElementById("refine")!.addEventListener("click", refineAndRender);
  document.getElementById("prev-slice")!.addEventListener("click", async () => {
    if (currentSlice > 0) {
      currentSlice -= 1;
      await ensureSession(currentSlice);
      render();
    }
  });
  document.getElementById("next-slice")!.addEventListener("click", async () => {
    if (currentSlice + 1 < sliceFiles.length) {
      currentSlice += 1;
      await ensureSession(currentSlice);
      render();
    }
  });

  let stroke: { x: number; y: number }[] | null = null;
  canvas.addEventListener("pointerdown", (e) => {
    stroke = [{ x: e.offsetX, y: e.offsetY }];
  });
  canvas.addEventListener("pointermove", (e) => {
    if (stroke) stroke.push({ x: e.offsetX, y: e.offsetY });
  });
  canvas.addEventListener("pointerup", async () => {
    const session = sessions[currentSlice];
    if (stroke && session) {
      await placeSeeds(strokePoints(stroke, session), state.tool);
    }
    stroke = null;
  });

  render();
}

bindUi();
