/** DOM bindings: render controller/dashboard state into fixed element ids.
 *
 * The page skeleton lives in index.html; this module only fills it in and
 * wires events, so every render path is exercisable under a DOM test
 * runtime without a bundler.
 */

import { LabelerController, LabelerState } from "./controller.js";
import { Dashboard, DashboardView } from "./dashboard.js";
import { renderChart } from "./chart.js";

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (el === null) throw new Error(`missing #${id} in page skeleton`);
  return el as T;
}

const TOAST_MS = 4000;

export class LabelerPage {
  private readonly banner: HTMLElement;
  private readonly panel: HTMLElement;
  private readonly imgA: HTMLImageElement;
  private readonly imgB: HTMLImageElement;
  private readonly pairClass: HTMLElement;
  private readonly pairId: HTMLElement;
  private readonly buttons: Record<string, HTMLButtonElement>;
  private readonly toastBox: HTMLElement;

  constructor(
    private readonly doc: Document,
    private readonly labeler: LabelerController,
  ) {
    this.banner = byId(doc, "state-banner");
    this.panel = byId(doc, "pair-panel");
    this.imgA = byId<HTMLImageElement>(doc, "img-a");
    this.imgB = byId<HTMLImageElement>(doc, "img-b");
    this.pairClass = byId(doc, "pair-class");
    this.pairId = byId(doc, "pair-id");
    this.toastBox = byId(doc, "toast");
    this.buttons = {
      a: byId<HTMLButtonElement>(doc, "btn-a"),
      b: byId<HTMLButtonElement>(doc, "btn-b"),
      tie: byId<HTMLButtonElement>(doc, "btn-tie"),
    };

    labeler.onState((s) => this.render(s));
    labeler.onToast((m) => this.toast(m));
    doc.addEventListener("keydown", (ev) => {
      const kev = ev as KeyboardEvent;
      if (kev.altKey || kev.ctrlKey || kev.metaKey) return;
      void this.labeler.handleKey(kev.key);
    });
    this.buttons.a.addEventListener("click", () => void this.labeler.submit("a"));
    this.buttons.b.addEventListener("click", () => void this.labeler.submit("b"));
    this.buttons.tie.addEventListener("click", () => void this.labeler.submit("tie"));
    this.render(labeler.state);
  }

  private setButtonsEnabled(on: boolean): void {
    for (const b of Object.values(this.buttons)) b.disabled = !on;
  }

  render(state: LabelerState): void {
    switch (state.kind) {
      case "loading":
        this.banner.textContent = "fetching next pair…";
        this.banner.className = "banner info";
        this.panel.hidden = true;
        this.setButtonsEnabled(false);
        break;
      case "empty":
        this.banner.textContent =
          "queue drained — label keys off until new pairs are queued; advance the epoch from the dashboard";
        this.banner.className = "banner empty";
        this.panel.hidden = true;
        this.setButtonsEnabled(false);
        break;
      case "error":
        this.banner.textContent =
          state.retryMs === null
            ? `service error: ${state.message} — reload to retry`
            : `connection trouble: ${state.message} — retrying in ${state.retryMs} ms`;
        this.banner.className = "banner error";
        this.panel.hidden = true;
        this.setButtonsEnabled(false);
        break;
      case "pair":
        this.banner.textContent = state.submitting ? "submitting…" : "a = left, b = right, t = tie";
        this.banner.className = "banner info";
        // Both sources are set before the panel is revealed or keys armed.
        this.imgA.src = state.pair.imageA;
        this.imgB.src = state.pair.imageB;
        this.pairClass.textContent = state.pair.className;
        this.pairId.textContent = `${state.pair.pairId} · epoch ${state.pair.epoch}`;
        this.panel.hidden = false;
        this.setButtonsEnabled(!state.submitting);
        break;
    }
  }

  toast(message: string): void {
    const note = this.doc.createElement("div");
    note.className = "toast-note";
    note.textContent = message;
    this.toastBox.appendChild(note);
    setTimeout(() => note.remove(), TOAST_MS);
  }
}

export class DashboardPage {
  private readonly counters: Record<string, HTMLElement>;
  private readonly statusEl: HTMLElement;
  private readonly staleEl: HTMLElement;
  private readonly advanceBtn: HTMLButtonElement;
  private readonly chartSvg: SVGElement;

  constructor(doc: Document, dashboard: Dashboard) {
    this.counters = {
      epoch: byId(doc, "dash-epoch"),
      progress: byId(doc, "dash-progress"),
      queued: byId(doc, "dash-queued"),
      claimed: byId(doc, "dash-claimed"),
      ties: byId(doc, "dash-ties"),
      total: byId(doc, "dash-total"),
    };
    this.statusEl = byId(doc, "dash-status");
    this.staleEl = byId(doc, "dash-stale");
    this.advanceBtn = byId<HTMLButtonElement>(doc, "btn-advance");
    this.chartSvg = doc.getElementById("chart") as unknown as SVGElement;
    if (this.chartSvg === null) throw new Error("missing #chart in page skeleton");

    dashboard.onChange((v) => this.render(v));
    this.advanceBtn.addEventListener("click", () => void dashboard.advance());
    this.render(dashboard.view);
  }

  render(v: DashboardView): void {
    this.counters.epoch.textContent = String(v.epoch);
    this.counters.progress.textContent = `${v.labeled} / ${v.minLabels}`;
    this.counters.queued.textContent = String(v.queued);
    this.counters.claimed.textContent = String(v.claimed);
    this.counters.ties.textContent = String(v.ties);
    this.counters.total.textContent = String(v.totalLabels);
    this.statusEl.textContent = v.status;
    this.statusEl.className = `status ${v.status}`;
    this.staleEl.hidden = !v.stale;
    this.advanceBtn.disabled = !v.advanceEnabled;
    renderChart(this.chartSvg, v.chart.epochs, v.chart.meanScores);
  }
}
