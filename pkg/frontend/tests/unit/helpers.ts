/** Shared test doubles: scripted API stubs and a DOM skeleton loader. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Choice, MetricsSnapshot, PairPayload, SessionState } from "../../src/api.js";
import { ApiError } from "../../src/api.js";

export function pairPayload(overrides: Partial<PairPayload> = {}): PairPayload {
  return {
    pair_id: "0000-0000",
    class: "ring",
    epoch: 0,
    image_a: "QUJD", // any base64 bytes; the UI never decodes them
    image_b: "REVG",
    ...overrides,
  };
}

export function sessionState(overrides: Partial<SessionState> = {}): SessionState {
  return {
    epoch: 0,
    queued: 0,
    claimed: 0,
    labeled: 0,
    ties: 0,
    min_labels: 3,
    status: "idle",
    ...overrides,
  };
}

export function metricsSnapshot(overrides: Partial<MetricsSnapshot> = {}): MetricsSnapshot {
  return { epochs: [], total_labels: 0, ...overrides };
}

type NextResult =
  | { kind: "pair"; value: PairPayload }
  | { kind: "empty" }
  | { kind: "error"; error: unknown };

/** Scripted PairApi: queue up nextPair outcomes, record submitted labels. */
export class FakePairApi {
  nextResults: NextResult[] = [];
  submitted: Array<{ pairId: string; choice: Choice }> = [];
  submitError: unknown = null;
  /** When set, submitLabel blocks until `releaseSubmit` is called. */
  private submitGate: Promise<void> | null = null;
  private openGate: (() => void) | null = null;

  queuePair(p: PairPayload): void {
    this.nextResults.push({ kind: "pair", value: p });
  }

  queueEmpty(): void {
    this.nextResults.push({ kind: "empty" });
  }

  queueError(error: unknown): void {
    this.nextResults.push({ kind: "error", error });
  }

  holdSubmits(): void {
    this.submitGate = new Promise((resolve) => {
      this.openGate = resolve;
    });
  }

  releaseSubmit(): void {
    this.openGate?.();
    this.submitGate = null;
    this.openGate = null;
  }

  async nextPair(): Promise<PairPayload | null> {
    const r = this.nextResults.shift();
    if (r === undefined) return null;
    if (r.kind === "error") throw r.error;
    return r.kind === "empty" ? null : r.value;
  }

  async submitLabel(pairId: string, choice: Choice): Promise<number> {
    if (this.submitGate !== null) await this.submitGate;
    if (this.submitError !== null) {
      const err = this.submitError;
      this.submitError = null;
      throw err;
    }
    this.submitted.push({ pairId, choice });
    return 0;
  }
}

/** Scripted SessionApi for dashboard tests. */
export class FakeSessionApi {
  sessions: Array<SessionState | Error> = [];
  metricsResults: Array<MetricsSnapshot | Error> = [];
  advanceCalls = 0;
  advanceError: unknown = null;

  async session(): Promise<SessionState> {
    const r = this.sessions.length > 1 ? this.sessions.shift() : this.sessions[0];
    if (r === undefined) throw new Error("no scripted session");
    if (r instanceof Error) throw r;
    return r;
  }

  async metrics(): Promise<MetricsSnapshot> {
    const r =
      this.metricsResults.length > 1 ? this.metricsResults.shift() : this.metricsResults[0];
    if (r === undefined) throw new Error("no scripted metrics");
    if (r instanceof Error) throw r;
    return r;
  }

  async advanceEpoch(): Promise<Record<string, unknown>> {
    this.advanceCalls += 1;
    if (this.advanceError !== null) {
      const err = this.advanceError;
      this.advanceError = null;
      throw err;
    }
    return { n_pairs: 3 };
  }
}

export const busyError = (): ApiError => new ApiError(409, "already labeled");
export const notEnough = (): ApiError => new ApiError(412, "2 labeled, need 3");

/** Put the real index.html body into the test document. */
export function mountSkeleton(doc: Document): void {
  const here = dirname(fileURLToPath(import.meta.url));
  const html = readFileSync(join(here, "..", "..", "index.html"), "utf8");
  const body = /<body>([\s\S]*)<\/body>/.exec(html);
  if (body === null) throw new Error("index.html has no <body>");
  // The test runtime must not execute the page's own bootstrap module.
  doc.body.innerHTML = body[1].replace(/<script[\s\S]*?<\/script>/g, "");
}

/** Poll until `cond` holds; fails the test after `ms` milliseconds. */
export async function until(cond: () => boolean, ms = 5000, label = "condition"): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > ms) throw new Error(`timed out waiting for ${label}`);
    await new Promise((r) => setTimeout(r, 10));
  }
}
