/**
 * Typed client for the workbench service. Every number shown anywhere in
 * the UI comes from these responses verbatim; the client never computes
 * risks or contribution scores itself.
 */

export interface PatientSummary {
  id: string;
  age: number;
  gender: "F" | "M";
  label: number;
  risk: number;
  n_visits: number;
  /** Present when the overview was requested with code axes. */
  code_scores?: Record<string, number>;
}

export interface ProjectionPayload {
  method: string;
  points: [number, number][];
  config: Record<string, unknown>;
}

export interface OverviewPayload {
  patients: PatientSummary[];
  projection: ProjectionPayload;
  model_version: number;
}

export interface SelectFilterBody {
  polygon?: [number, number][] | null;
  age?: [number, number] | null;
  gender?: "F" | "M" | null;
  risk?: [number, number] | null;
  codes?: { code: number; range: [number, number] }[];
}

export interface SelectPayload {
  ids: string[];
  summary: {
    count: number;
    mean_risk: number | null;
    mean_age: number | null;
    gender_counts: Record<string, number>;
    n_cases: number;
  };
}

export interface ContributorEntry {
  code: number;
  label: string;
  kind: string;
  score: number;
}

export interface SummaryPayload {
  table: {
    n_patients: number;
    accuracy: number;
    mean_risk: number;
    n_codes: number;
    top_code: string | null;
    total_contribution: number;
  };
  top_contributors: ContributorEntry[];
  temporal: {
    codes: number[];
    offsets: number[];
    mean: number[][];
    std: number[][];
    support: number[];
  };
}

export interface VisitCode {
  code: number;
  label: string;
  kind: string;
  score: number;
}

export interface PatientDetailPayload {
  id: string;
  age: number;
  gender: string;
  label: number;
  group: string;
  visits: { day: number; codes: VisitCode[] }[];
  risk: number;
  risk_curve: number[];
  visit_sums: number[];
  contributions: { visit: number; code: number; score: number }[];
  model_version: number;
}

export type EditOp =
  | { op: "add_code"; visit: number; code: number }
  | { op: "remove_code"; visit: number; code: number }
  | { op: "move_visit"; visit: number; day: number }
  | { op: "add_visit"; day: number; codes: number[] }
  | { op: "remove_visit"; visit: number };

export interface SnapshotPayload {
  risk: number;
  risk_curve: number[];
  visit_sums: number[];
  contributions: { visit: number; code: number; score: number }[];
}

export interface WhatIfPayload {
  before: SnapshotPayload;
  after: SnapshotPayload;
  edited: unknown;
}

export interface SteeringSelection {
  visit: number;
  code: number;
  direction: "increase" | "decrease";
}

export interface RetrainPayload {
  preview_id: string;
  report: {
    losses: number[];
    before: SnapshotPayload;
    after: SnapshotPayload;
    s_pos_before: number;
    s_pos_after: number;
    s_neg_before: number;
    s_neg_after: number;
    seconds: number;
  };
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

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class WorkbenchClient {
  constructor(
    private base: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, init);
    const body = await res.json();
    if (!res.ok) {
      const err = (body as { error?: { code?: string; message?: string } }).error ?? {};
      throw new ApiError(res.status, err.code ?? "unknown", err.message ?? "request failed");
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  overview(codes: number[] = []): Promise<OverviewPayload> {
    const suffix = codes.length ? `?codes=${codes.join(",")}` : "";
    return this.request(`/overview${suffix}`);
  }

  select(filter: SelectFilterBody): Promise<SelectPayload> {
    return this.post("/select", filter);
  }

  summary(ids: string[]): Promise<SummaryPayload> {
    return this.request(`/summary?ids=${encodeURIComponent(ids.join(","))}`);
  }

  patient(id: string): Promise<PatientDetailPayload> {
    return this.request(`/patients/${encodeURIComponent(id)}`);
  }

  whatIf(id: string, script: EditOp[]): Promise<WhatIfPayload> {
    return this.post(`/patients/${encodeURIComponent(id)}/whatif`, { script });
  }

  retrainPreview(
    id: string,
    selections: SteeringSelection[],
    iterations = 20,
    learningRate = 0.01,
  ): Promise<RetrainPayload> {
    return this.post(`/patients/${encodeURIComponent(id)}/retrain/preview`, {
      selections,
      iterations,
      learning_rate: learningRate,
    });
  }

  retrainCommit(id: string, previewId: string): Promise<{ committed: boolean; model_version: number }> {
    return this.post(`/patients/${encodeURIComponent(id)}/retrain/commit`, {
      preview_id: previewId,
    });
  }

  aggregates(): Promise<{ n_patients: number; s1: number[]; s2: (number | null)[]; counts: number[]; labels: string[] | null }> {
    return this.request("/aggregates");
  }
}
