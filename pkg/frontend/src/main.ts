/** Page wiring: construct the client, controller, dashboard, and views.
 *
 * `createApp` is the single composition point so tests can assemble the
 * exact production object graph against any base URL.
 */

import { ApiClient } from "./api.js";
import { LabelerController } from "./controller.js";
import { Dashboard } from "./dashboard.js";
import { DashboardPage, LabelerPage } from "./view.js";

export interface App {
  api: ApiClient;
  labeler: LabelerController;
  dashboard: Dashboard;
  labelerPage: LabelerPage;
  dashboardPage: DashboardPage;
  stop: () => void;
}

export interface AppOptions {
  /** Service origin; empty string = same origin as the page. */
  baseUrl?: string;
  /** Dashboard poll interval; 0 disables the timer (tests poll manually). */
  pollMs?: number;
}

export function createApp(doc: Document, opts: AppOptions = {}): App {
  const api = new ApiClient(opts.baseUrl ?? "");
  const labeler = new LabelerController(api);
  const dashboard = new Dashboard(api);
  const labelerPage = new LabelerPage(doc, labeler);
  const dashboardPage = new DashboardPage(doc, dashboard);
  dashboard.onToast((m) => labelerPage.toast(m));

  const pollMs = opts.pollMs ?? 2000;
  if (pollMs > 0) dashboard.startPolling(pollMs);
  void labeler.start();
  void dashboard.poll();

  return {
    api,
    labeler,
    dashboard,
    labelerPage,
    dashboardPage,
    stop: () => dashboard.stopPolling(),
  };
}

declare global {
  interface Window {
    d3poLabeler?: App;
  }
}

// In the browser the page boots itself; under tests there is no #pair-panel
// at import time, so this stays inert.
if (typeof document !== "undefined" && document.getElementById("pair-panel") !== null) {
  const params = new URLSearchParams(window.location.search);
  window.d3poLabeler = createApp(document, { baseUrl: params.get("api") ?? "" });
}
