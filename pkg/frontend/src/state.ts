// Pure view-state logic, kept DOM-free so it is directly unit-testable.
// The rendered view is always a projection of what the service returned;
// reloading reconstructs it from GET endpoints alone.

import type { FieldSnapshot, Proposal, TraceRecord } from "./api.js";

export type FieldLayer = "exceedance" | "mean" | "variance";

export interface EstimatePoint {
  step: number;
  value: number;
  stdError: number;
}

export interface SessionView {
  id: string;
  gamma: number;
  step: number;
  pendingProposal: Proposal | null;
  pendingInitial: number[][] | null;
  initialDone: number;
  estimates: EstimatePoint[];
  field: FieldSnapshot | null;
  layer: FieldLayer;
  computing: boolean;
  banner: string | null;
  inFlight: boolean;
}

export function emptyView(id: string, gamma: number): SessionView {
  return {
    id, gamma, step: 0,
    pendingProposal: null, pendingInitial: null, initialDone: 0,
    estimates: [], field: null, layer: "exceedance",
    computing: false, banner: null, inFlight: false,
  };
}

export function applyTrace(view: SessionView,
                           records: TraceRecord[]): SessionView {
  const estimates = records.map((r) => ({
    step: r.step, value: r.estimate, stdError: r.std_error,
  }));
  const step = records.length ? records[records.length - 1].step : 0;
  return { ...view, estimates, step };
}

export function applyProposal(view: SessionView,
                              proposal: Proposal): SessionView {
  return { ...view, pendingProposal: proposal, computing: false,
           banner: null };
}

export function applyComputing(view: SessionView): SessionView {
  return { ...view, computing: true };
}

export function applyObserved(view: SessionView, step: number): SessionView {
  return { ...view, pendingProposal: null, step, banner: null };
}

export function applyBanner(view: SessionView, message: string): SessionView {
  return { ...view, banner: message, computing: false };
}

export function applyField(view: SessionView,
                           field: FieldSnapshot): SessionView {
  return { ...view, field };
}

export function setLayer(view: SessionView, layer: FieldLayer): SessionView {
  return { ...view, layer };
}

// The submit button is enabled only when there is something to observe
// and the entered response parses to a finite number.
export function canSubmit(view: SessionView, yText: string): boolean {
  if (view.inFlight) return false;
  const hasTarget = view.pendingProposal !== null ||
    (view.pendingInitial !== null &&
     view.initialDone < view.pendingInitial.length);
  if (!hasTarget) return false;
  if (yText.trim() === "") return false;
  return Number.isFinite(Number(yText));
}

// The point the next observation applies to: the pending proposal, or the
// next un-run initial design point.
export function nextObservationTarget(view: SessionView): number[] | null {
  if (view.pendingProposal) return view.pendingProposal.x;
  if (view.pendingInitial && view.initialDone < view.pendingInitial.length) {
    return view.pendingInitial[view.initialDone];
  }
  return null;
}

// Marker classes must reproduce the served responses exactly: a design
// point is an exceedance marker iff its response is strictly above gamma.
export function markerClasses(responses: number[],
                              gamma: number): ("exceed" | "safe")[] {
  return responses.map((y) => (y > gamma ? "exceed" : "safe"));
}

export function markerClassesMatch(field: FieldSnapshot,
                                   gamma: number): boolean {
  const computed = markerClasses(field.design.responses, gamma);
  return computed.every(
    (cls, i) => (cls === "exceed") === field.design.exceeds[i]);
}

export function layerValues(field: FieldSnapshot,
                            layer: FieldLayer): number[] {
  return layer === "mean" ? field.mean :
    layer === "variance" ? field.variance : field.exceedance;
}

export function formatPoint(x: number[]): string {
  return x.map((v) => v.toPrecision(8)).join(", ");
}
