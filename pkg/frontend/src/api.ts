/** Typed JSON client for the labeling service.
 *
 * The UI talks to the backend exclusively through these five calls; every
 * response is validated before it reaches view code, so a malformed payload
 * surfaces as a MalformedPayload error (banner) instead of a crash.
 */

export type Choice = "a" | "b" | "tie";

export interface PairPayload {
  pair_id: string;
  class: string;
  epoch: number;
  image_a: string; // base64 PNG
  image_b: string; // base64 PNG
}

export interface SessionState {
  epoch: number;
  queued: number;
  claimed: number;
  labeled: number;
  ties: number;
  min_labels: number;
  status: "idle" | "training";
}

export interface EpochPoint {
  epoch: number;
  mean_score: number;
  n_pairs: number;
  [extra: string]: unknown;
}

export interface MetricsSnapshot {
  epochs: EpochPoint[];
  total_labels: number;
}

/** Non-2xx response; `status` carries the HTTP code for branch logic. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 2xx response whose body does not match the expected shape. */
export class MalformedPayload extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedPayload";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function need(cond: boolean, what: string): void {
  if (!cond) throw new MalformedPayload(`bad payload: ${what}`);
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...a) => fetch(...a),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok && res.status !== 204) {
      let detail = `${res.status}`;
      try {
        const body: unknown = await res.json();
        if (isRecord(body) && typeof body.error === "string") detail = body.error;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(res.status, detail);
    }
    return res;
  }

  private async json(path: string, init?: RequestInit): Promise<unknown> {
    const res = await this.request(path, init);
    try {
      return await res.json();
    } catch {
      throw new MalformedPayload(`${path}: body is not JSON`);
    }
  }

  /** Claim the oldest unlabeled pair; null means the queue is drained. */
  async nextPair(): Promise<PairPayload | null> {
    const res = await this.request("/api/pairs/next");
    if (res.status === 204) return null;
    let body: unknown;
    try {
      body = await res.json();
    } catch {
      throw new MalformedPayload("pair: body is not JSON");
    }
    need(isRecord(body), "pair: not an object");
    const p = body as Record<string, unknown>;
    need(typeof p.pair_id === "string" && p.pair_id.length > 0, "pair: missing pair_id");
    need(typeof p.class === "string", "pair: missing class");
    need(typeof p.epoch === "number", "pair: missing epoch");
    need(typeof p.image_a === "string" && (p.image_a as string).length > 0, "pair: missing image_a");
    need(typeof p.image_b === "string" && (p.image_b as string).length > 0, "pair: missing image_b");
    return p as unknown as PairPayload;
  }

  /** Record a choice for a claimed pair; resolves to pairs still unlabeled. */
  async submitLabel(pairId: string, choice: Choice): Promise<number> {
    const body = await this.json("/api/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_id: pairId, choice }),
    });
    need(isRecord(body) && typeof body.remaining === "number", "label: missing remaining");
    return (body as { remaining: number }).remaining;
  }

  async session(): Promise<SessionState> {
    const body = await this.json("/api/session");
    need(isRecord(body), "session: not an object");
    const s = body as Record<string, unknown>;
    for (const k of ["epoch", "queued", "claimed", "labeled", "ties", "min_labels"]) {
      need(typeof s[k] === "number", `session: missing ${k}`);
    }
    need(s.status === "idle" || s.status === "training", "session: bad status");
    return s as unknown as SessionState;
  }

  async metrics(): Promise<MetricsSnapshot> {
    const body = await this.json("/api/metrics");
    need(isRecord(body), "metrics: not an object");
    const m = body as Record<string, unknown>;
    need(Array.isArray(m.epochs), "metrics: missing epochs");
    need(typeof m.total_labels === "number", "metrics: missing total_labels");
    for (const e of m.epochs as unknown[]) {
      need(isRecord(e) && typeof e.epoch === "number", "metrics: bad epoch entry");
    }
    return m as unknown as MetricsSnapshot;
  }

  /** Train on this epoch's labels and queue the next epoch. */
  async advanceEpoch(): Promise<Record<string, unknown>> {
    const body = await this.json("/api/epoch/advance", { method: "POST" });
    need(isRecord(body), "advance: not an object");
    return body as Record<string, unknown>;
  }
}

/** `data:` URL for an <img> from the service's base64 PNG. */
export function pngDataUrl(base64: string): string {
  return `data:image/png;base64,${base64}`;
}
