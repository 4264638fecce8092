/** Labeling state machine: one pair on screen, one request in flight, ever.
 *
 * States:
 *   loading — a fetch for the next pair is in flight
 *   pair    — two images on screen; keys armed unless a submit is in flight
 *   empty   — queue drained; label keys disabled
 *   error   — banner; `retryMs` set when a retry is scheduled (network), null
 *             when the payload itself was bad and a manual reload is needed
 *
 * Labels are only ever constructed here in response to an explicit
 * user action (key or button); nothing is fabricated client-side.
 */

import { ApiError, Choice, MalformedPayload, PairPayload, pngDataUrl } from "./api.js";

/** The slice of the API the labeling loop needs (ApiClient satisfies it). */
export interface PairApi {
  nextPair(): Promise<PairPayload | null>;
  submitLabel(pairId: string, choice: Choice): Promise<number>;
}

export interface PairView {
  pairId: string;
  className: string;
  epoch: number;
  imageA: string; // data: URL
  imageB: string; // data: URL
}

export type LabelerState =
  | { kind: "loading" }
  | { kind: "pair"; pair: PairView; submitting: boolean }
  | { kind: "empty" }
  | { kind: "error"; message: string; retryMs: number | null };

export type StateListener = (state: LabelerState) => void;
export type ToastListener = (message: string) => void;
export type Scheduler = (fn: () => void, ms: number) => void;

const KEY_TO_CHOICE: Record<string, Choice> = { a: "a", b: "b", t: "tie" };

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

export class LabelerController {
  state: LabelerState = { kind: "loading" };

  private listeners: StateListener[] = [];
  private toastListeners: ToastListener[] = [];
  private backoffMs = BACKOFF_START_MS;
  private epochOfTurn = 0; // stale async completions are dropped

  constructor(
    private readonly api: PairApi,
    private readonly schedule: Scheduler = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  onState(fn: StateListener): void {
    this.listeners.push(fn);
  }

  onToast(fn: ToastListener): void {
    this.toastListeners.push(fn);
  }

  private setState(s: LabelerState): void {
    this.state = s;
    for (const fn of this.listeners) fn(s);
  }

  private toast(message: string): void {
    for (const fn of this.toastListeners) fn(message);
  }

  /** True when a/b/t keys would do anything right now. */
  get keysArmed(): boolean {
    return this.state.kind === "pair" && !this.state.submitting;
  }

  async start(): Promise<void> {
    await this.refresh();
  }

  /** Fetch and show the next pair (or the drained state). */
  async refresh(): Promise<void> {
    const turn = ++this.epochOfTurn;
    this.setState({ kind: "loading" });
    let payload;
    try {
      payload = await this.api.nextPair();
    } catch (err) {
      if (turn !== this.epochOfTurn) return;
      this.fail(err);
      return;
    }
    if (turn !== this.epochOfTurn) return;
    this.backoffMs = BACKOFF_START_MS;
    if (payload === null) {
      this.setState({ kind: "empty" });
      return;
    }
    this.setState({
      kind: "pair",
      submitting: false,
      pair: {
        pairId: payload.pair_id,
        className: payload.class,
        epoch: payload.epoch,
        imageA: pngDataUrl(payload.image_a),
        imageB: pngDataUrl(payload.image_b),
      },
    });
  }

  /** Keyboard entry point; unknown keys and disarmed states are no-ops. */
  async handleKey(key: string): Promise<void> {
    const choice = KEY_TO_CHOICE[key.toLowerCase()];
    if (choice === undefined) return;
    await this.submit(choice);
  }

  /** Submit a choice for the displayed pair, then roll to the next one. */
  async submit(choice: Choice): Promise<void> {
    if (this.state.kind !== "pair" || this.state.submitting) return; // no pair: no-op
    const pair = this.state.pair;
    this.setState({ kind: "pair", pair, submitting: true }); // disarm while in flight
    try {
      await this.api.submitLabel(pair.pairId, choice);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Labeled elsewhere (or service busy): nothing was recorded twice;
        // move on to whatever is next.
        this.toast(`pair ${pair.pairId}: ${err.message} — skipping ahead`);
        await this.refresh();
        return;
      }
      if (err instanceof ApiError && err.status === 404) {
        this.toast(`pair ${pair.pairId} is gone — refetching`);
        await this.refresh();
        return;
      }
      this.fail(err);
      return;
    }
    await this.refresh();
  }

  private fail(err: unknown): void {
    if (err instanceof MalformedPayload || err instanceof ApiError) {
      // The service answered but the answer is unusable; retrying the same
      // request would loop, so park on a banner.
      this.setState({ kind: "error", message: err.message, retryMs: null });
      return;
    }
    // Network-level failure: banner plus scheduled retry with backoff.
    const ms = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_CAP_MS);
    this.setState({
      kind: "error",
      message: err instanceof Error ? err.message : String(err),
      retryMs: ms,
    });
    this.schedule(() => {
      if (this.state.kind === "error") void this.refresh();
    }, ms);
  }
}
