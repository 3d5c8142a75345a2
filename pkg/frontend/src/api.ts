// Typed client for the campaign service HTTP contract.

export interface ApiError {
  code: string;
  message: string;
  field_path?: string;
  status: number;
}

export interface Proposal {
  x: number[];
  info_gain: number;
  lpi: number;
  sa_iterations_used: number;
  step: number;
}

export interface ComputingHint {
  code: "computing";
  retry_after_ms: number;
}

export interface SessionSummary {
  id: string;
  oracle: string;
  dim: number;
  step: number;
  sequential_steps: number;
  initial_count: number;
  gamma: number;
  bounds: number[][];
  estimate?: number;
  std_error?: number;
  pending_proposal: Proposal | null;
  pending_initial: number[][] | null;
}

export interface EstimateInfo {
  step: number;
  estimate: number;
  std_error: number;
  sample_count: number;
}

export interface FieldSnapshot {
  nx: number;
  ny: number;
  x: number[];
  y: number[];
  mean: number[];
  variance: number[];
  exceedance: number[];
  design: { points: number[][]; responses: number[]; exceeds: boolean[] };
  omega_cloud: number[][];
}

export interface TraceRecord {
  step: number;
  estimate: number;
  std_error: number;
  x_star?: number[];
  y_star?: number;
  info_gain?: number;
  lpi?: number;
}

async function request<T>(method: string, path: string, body?: unknown):
    Promise<T | ComputingHint> {
  const resp = await fetch(path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await resp.json().catch(() => ({}));
  if (resp.status === 202) {
    return payload as ComputingHint;
  }
  if (!resp.ok) {
    const err: ApiError = {
      code: payload.code ?? "error",
      message: payload.message ?? resp.statusText,
      field_path: payload.field_path,
      status: resp.status,
    };
    throw err;
  }
  return payload as T;
}

export const api = {
  createSession: (config: unknown, initialResponses?: number[]) =>
    request<SessionSummary & { initial_design?: unknown }>(
      "POST", "/sessions",
      initialResponses === undefined
        ? { config }
        : { config, initial_responses: initialResponses }),
  listSessions: () =>
    request<{ sessions: string[] }>("GET", "/sessions"),
  summary: (id: string) =>
    request<SessionSummary>("GET", `/sessions/${id}`),
  proposal: (id: string) =>
    request<Proposal>("GET", `/sessions/${id}/proposal`),
  observe: (id: string, x: number[], y: number) =>
    request<{ step: number; estimate: number; std_error: number }>(
      "POST", `/sessions/${id}/observations`, { x, y }),
  estimate: (id: string) =>
    request<EstimateInfo>("GET", `/sessions/${id}/estimate`),
  trace: (id: string) =>
    request<{ records: TraceRecord[] }>("GET", `/sessions/${id}/trace`),
  field: (id: string, nx = 96, ny = 96, cloud = 600) =>
    request<FieldSnapshot>(
      "GET", `/sessions/${id}/field?nx=${nx}&ny=${ny}&cloud=${cloud}`),
};

export function isComputing(v: unknown): v is ComputingHint {
  return typeof v === "object" && v !== null &&
    (v as ComputingHint).code === "computing";
}
