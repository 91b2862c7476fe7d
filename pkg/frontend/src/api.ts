/**
 * Typed client for the segmentation session API.
 *
 * Endpoints: POST /sessions (multipart image [+ gt]), GET /sessions/{id},
 * POST /sessions/{id}/seeds, POST /sessions/{id}/refine,
 * DELETE /sessions/{id}. Error bodies are JSON {code, message}.
 */
import type { RleMask } from "./codec.js";

export interface SeedSetJson {
  fg: [number, number][];
  bg: [number, number][];
}

export interface CreateSessionResponse {
  session_id: string;
  revision: number;
  h: number;
  w: number;
  initial_mask: RleMask;
  difficulty_map: string;
}

export interface SessionState {
  session_id: string;
  revision: number;
  h: number;
  w: number;
  seeds: SeedSetJson;
  has_gt: boolean;
}

export interface MetricsJson {
  dice: number;
  sen: number;
  ppv: number;
}

export interface RefineResponse {
  revision: number;
  refined_mask: RleMask;
  difficulty_map: string;
  metrics?: MetricsJson;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function raise(resp: Response): Promise<never> {
  let code = "unknown";
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(resp.status, code, message);
}

export class SessionClient {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(
    image: Uint8Array,
    filename = "image.img",
    gt?: Uint8Array,
  ): Promise<CreateSessionResponse> {
    const form = new FormData();
    form.append("image", new Blob([image.slice().buffer]), filename);
    if (gt) form.append("gt", new Blob([gt.slice().buffer]), "gt.msk");
    const resp = await fetch(this.url("/sessions"), { method: "POST", body: form });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async getSession(sessionId: string): Promise<SessionState> {
    const resp = await fetch(this.url(`/sessions/${sessionId}`));
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async addSeeds(
    sessionId: string,
    delta: Partial<SeedSetJson> & { replace?: boolean },
  ): Promise<number> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/seeds`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(delta),
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()).revision;
  }

  async refine(sessionId: string): Promise<RefineResponse> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/refine`), { method: "POST" });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async deleteSession(sessionId: string): Promise<void> {
    const resp = await fetch(this.url(`/sessions/${sessionId}`), { method: "DELETE" });
    if (!resp.ok) await raise(resp);
  }
}
