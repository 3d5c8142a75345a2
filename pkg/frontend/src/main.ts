// Operator console wiring: one session at a time, 1 s polling, at most
// one mutation in flight.

import { api, isComputing, type ApiError, type SessionSummary } from "./api.js";
import { drawTrace } from "./chart.js";
import { drawField } from "./heatmap.js";
import {
  applyBanner,
  applyComputing,
  applyField,
  applyObserved,
  applyProposal,
  applyTrace,
  canSubmit,
  emptyView,
  formatPoint,
  layerValues,
  nextObservationTarget,
  setLayer,
  type FieldLayer,
  type SessionView,
} from "./state.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

let view: SessionView | null = null;
let pollTimer: number | null = null;
let proposalRequested = false;

const DEFAULT_CONFIG = {
  params: { beta: 0.0, tau2: 1.0, theta: 1.0, nugget: 1e-8 },
  gamma: 2.0,
  env: { kind: "iid-standard-gaussian", dim: 2 },
  oracle: { id: "manual" },
  initial_design: { count: 8, bounds: [[-3.0, 3.0], [-3.0, 3.0]] },
  sa: { a0: 20.0, iterations: 25, grad_samples: 300,
        rescore_outer: 16, rescore_inner: 300 },
  steps: 10,
  eval: { samples: 2000, resample: false },
  seed: 7,
  selection_mode: "sa-optimized",
};

function setBanner(message: string | null): void {
  const el = $("banner");
  el.textContent = message ?? "";
  el.style.display = message ? "block" : "none";
}

function describeError(err: unknown): string {
  const e = err as ApiError;
  if (e && e.message) {
    const path = e.field_path ? ` (${e.field_path})` : "";
    return `${e.code ?? "error"}: ${e.message}${path}`;
  }
  return String(err);
}

function render(): void {
  const has = view !== null;
  $("session-panel").style.display = has ? "block" : "none";
  if (!view) return;
  $("session-id").textContent = view.id;
  $("step-counter").textContent = String(view.step);
  setBanner(view.banner);

  const prop = view.pendingProposal;
  const initial = view.pendingInitial;
  const target = nextObservationTarget(view);
  if (initial && view.initialDone < initial.length) {
    $("proposal-coords").textContent =
      `initial design point ${view.initialDone + 1}/${initial.length}: ` +
      formatPoint(initial[view.initialDone]);
    $("proposal-scores").textContent = "run this seed scenario on the track";
  } else if (prop) {
    $("proposal-coords").textContent = formatPoint(prop.x);
    $("proposal-scores").textContent =
      `info gain ${prop.info_gain.toExponential(3)} | ` +
      `local impact ${prop.lpi.toExponential(3)}`;
  } else {
    $("proposal-coords").textContent = view.computing
      ? "computing next scenario..." : "-";
    $("proposal-scores").textContent = "";
  }
  $("spinner").style.display = view.computing ? "inline-block" : "none";
  ($("propose-btn") as HTMLButtonElement).disabled =
    view.computing || prop !== null || (initial !== null &&
      view.initialDone < (initial?.length ?? 0));

  const yText = ($("y-input") as HTMLInputElement).value;
  ($("submit-btn") as HTMLButtonElement).disabled =
    !canSubmit(view, yText) || target === null;

  const est = view.estimates[view.estimates.length - 1];
  $("estimate-readout").textContent = est
    ? `${est.value.toFixed(5)} +- ${(2 * est.stdError).toFixed(5)}`
    : "-";
  drawTrace($("trace-canvas") as HTMLCanvasElement, view.estimates);

  const fieldPanel = $("field-panel");
  if (view.field) {
    fieldPanel.style.display = "block";
    $("field-note").textContent = "";
    drawField($("field-canvas") as HTMLCanvasElement, view.field,
              layerValues(view.field, view.layer), view.gamma);
  } else {
    $("field-note").textContent =
      "field rendering is available for 2-D scenario spaces only";
  }
}

async function refreshReadModels(): Promise<void> {
  if (!view) return;
  try {
    const trace = await api.trace(view.id);
    if (!isComputing(trace)) view = applyTrace(view, trace.records);
  } catch {
    /* session may not be initialized yet */
  }
  try {
    const field = await api.field(view.id);
    if (!isComputing(field)) view = applyField(view, field);
  } catch {
    view = view ? { ...view, field: null } : view;
  }
  render();
}

async function pollOnce(): Promise<void> {
  if (!view || view.inFlight) return;
  try {
    const summary = await api.summary(view.id);
    if (isComputing(summary)) return;
    const s = summary as SessionSummary;
    view.pendingInitial = s.pending_initial;
    if (s.pending_proposal) {
      view = applyProposal(view, s.pending_proposal);
    }
    if (proposalRequested && !s.pending_proposal) {
      const prop = await api.proposal(view.id);
      if (isComputing(prop)) {
        view = applyComputing(view);
      } else {
        view = applyProposal(view, prop);
        proposalRequested = false;
      }
    }
  } catch (err) {
    const e = err as ApiError;
    if (e.status === 404) {
      view = applyBanner(view, "session no longer exists on the server; " +
        "create or attach a new one");
      stopPolling();
    }
  }
  render();
}

function startPolling(): void {
  stopPolling();
  pollTimer = window.setInterval(pollOnce, 1000);
}

function stopPolling(): void {
  if (pollTimer !== null) window.clearInterval(pollTimer);
  pollTimer = null;
}

async function attach(id: string, gamma: number): Promise<void> {
  view = emptyView(id, gamma);
  proposalRequested = false;
  await refreshReadModels();
  await pollOnce();
  startPolling();
  render();
}

async function onCreate(): Promise<void> {
  try {
    const doc = JSON.parse(($("config-input") as HTMLTextAreaElement).value);
    const created = await api.createSession(doc);
    if (isComputing(created)) return;
    await attach(created.id, doc.gamma ?? 0);
  } catch (err) {
    setBanner(describeError(err));
  }
}

async function onAttach(): Promise<void> {
  const id = ($("attach-input") as HTMLInputElement).value.trim();
  if (!id) return;
  try {
    const summary = await api.summary(id);
    if (!isComputing(summary)) {
      await attach(id, (summary as SessionSummary).gamma);
    }
  } catch (err) {
    setBanner(describeError(err));
  }
}

async function onPropose(): Promise<void> {
  if (!view) return;
  proposalRequested = true;
  try {
    const prop = await api.proposal(view.id);
    if (isComputing(prop)) {
      view = applyComputing(view);
    } else {
      view = applyProposal(view, prop);
      proposalRequested = false;
    }
  } catch (err) {
    view = applyBanner(view, describeError(err));
    proposalRequested = false;
  }
  render();
}

async function onSubmit(): Promise<void> {
  if (!view) return;
  const target = nextObservationTarget(view);
  const yText = ($("y-input") as HTMLInputElement).value;
  if (target === null || !canSubmit(view, yText)) return;
  view.inFlight = true;
  render();
  try {
    const result = await api.observe(view.id, target, Number(yText));
    view.inFlight = false;
    if (!isComputing(result)) {
      if (view.pendingInitial) view.initialDone += 1;
      view = applyObserved(view, result.step ?? view.step);
      ($("y-input") as HTMLInputElement).value = "";
      await refreshReadModels();
    }
  } catch (err) {
    view.inFlight = false;
    view = applyBanner(view, describeError(err));
  }
  render();
}

function onLayer(layer: FieldLayer): void {
  if (!view) return;
  view = setLayer(view, layer);  // redraw from the cached snapshot
  render();
}

document.addEventListener("DOMContentLoaded", () => {
  ($("config-input") as HTMLTextAreaElement).value =
    JSON.stringify(DEFAULT_CONFIG, null, 2);
  $("create-btn").addEventListener("click", onCreate);
  $("attach-btn").addEventListener("click", onAttach);
  $("propose-btn").addEventListener("click", onPropose);
  $("submit-btn").addEventListener("click", onSubmit);
  $("y-input").addEventListener("input", render);
  for (const layer of ["exceedance", "mean", "variance"] as FieldLayer[]) {
    $(`layer-${layer}`).addEventListener("click", () => onLayer(layer));
  }
  render();
});
