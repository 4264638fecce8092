/** Session dashboard: progress counters, training curve, epoch advance.
 *
 * Everything shown is refreshed from GET /api/session and /api/metrics;
 * nothing is fabricated locally. A failed poll keeps the last good values
 * on screen and raises the `stale` flag instead of blanking the page.
 */

import { ApiError, MetricsSnapshot, SessionState } from "./api.js";

/** The slice of the API the dashboard needs (ApiClient satisfies it). */
export interface SessionApi {
  session(): Promise<SessionState>;
  metrics(): Promise<MetricsSnapshot>;
  advanceEpoch(): Promise<Record<string, unknown>>;
}

export interface DashboardView {
  epoch: number;
  queued: number;
  claimed: number;
  labeled: number;
  ties: number;
  minLabels: number;
  totalLabels: number;
  status: "idle" | "training" | "unknown";
  /** Advance needs enough labels and an idle trainer. */
  advanceEnabled: boolean;
  /** Last poll failed; numbers on screen are from the previous one. */
  stale: boolean;
  chart: { epochs: number[]; meanScores: number[] };
}

export type DashboardListener = (view: DashboardView) => void;
export type ToastListener = (message: string) => void;

export function emptyDashboard(): DashboardView {
  return {
    epoch: 0,
    queued: 0,
    claimed: 0,
    labeled: 0,
    ties: 0,
    minLabels: 0,
    totalLabels: 0,
    status: "unknown",
    advanceEnabled: false,
    stale: false,
    chart: { epochs: [], meanScores: [] },
  };
}

export class Dashboard {
  view: DashboardView = emptyDashboard();

  private listeners: DashboardListener[] = [];
  private toastListeners: ToastListener[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private advancing = false;

  constructor(private readonly api: SessionApi) {}

  onChange(fn: DashboardListener): void {
    this.listeners.push(fn);
  }

  onToast(fn: ToastListener): void {
    this.toastListeners.push(fn);
  }

  private publish(): void {
    for (const fn of this.listeners) fn(this.view);
  }

  private toast(message: string): void {
    for (const fn of this.toastListeners) fn(message);
  }

  /** One refresh of both endpoints; never throws. */
  async poll(): Promise<void> {
    try {
      const [session, metrics] = await Promise.all([this.api.session(), this.api.metrics()]);
      const points = metrics.epochs.filter((e) => typeof e.mean_score === "number");
      this.view = {
        epoch: session.epoch,
        queued: session.queued,
        claimed: session.claimed,
        labeled: session.labeled,
        ties: session.ties,
        minLabels: session.min_labels,
        totalLabels: metrics.total_labels,
        status: session.status,
        advanceEnabled:
          session.status === "idle" && !this.advancing && session.labeled >= session.min_labels,
        stale: false,
        chart: {
          epochs: points.map((e) => e.epoch),
          meanScores: points.map((e) => e.mean_score),
        },
      };
    } catch {
      this.view = { ...this.view, stale: true, advanceEnabled: false };
    }
    this.publish();
  }

  startPolling(intervalMs: number): void {
    this.stopPolling();
    this.timer = setInterval(() => void this.poll(), intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Trigger epoch training; refuses repeat clicks while one is running. */
  async advance(): Promise<boolean> {
    if (this.advancing) return false;
    this.advancing = true;
    this.view = { ...this.view, advanceEnabled: false, status: "training" };
    this.publish();
    try {
      await this.api.advanceEpoch();
      this.toast("epoch trained; next queue is up");
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.toast(`advance refused: ${err.message}`);
      } else {
        this.toast(`advance failed: ${err instanceof Error ? err.message : String(err)}`);
      }
      return false;
    } finally {
      this.advancing = false;
      await this.poll();
    }
  }
}
