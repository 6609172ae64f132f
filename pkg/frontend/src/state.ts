/**
 * Client-side view state: the active cohort filters (composed
 * conjunctively -- a patient must satisfy every active filter), the
 * selected patient, the editor draft, and the pending steering request.
 */

import {
  EditOp,
  OverviewPayload,
  PatientSummary,
  SelectFilterBody,
  SteeringSelection,
} from "./api.js";

export interface Filters {
  polygon: [number, number][] | null;
  age: [number, number] | null;
  gender: "F" | "M" | null;
  risk: [number, number] | null;
  codes: { code: number; range: [number, number] }[];
}

export const emptyFilters = (): Filters => ({
  polygon: null,
  age: null,
  gender: null,
  risk: null,
  codes: [],
});

export function filtersToRequest(f: Filters): SelectFilterBody {
  return {
    polygon: f.polygon,
    age: f.age,
    gender: f.gender,
    risk: f.risk,
    codes: f.codes,
  };
}

/**
 * Local conjunction over the filters the client can evaluate itself
 * (everything except the lasso polygon and code axes, which need server
 * data). Used only to decide which filters are active; the authoritative
 * selection always comes from POST /select.
 */
export function locallySatisfies(p: PatientSummary, f: Filters): boolean {
  if (f.age && (p.age < f.age[0] || p.age > f.age[1])) return false;
  if (f.gender && p.gender !== f.gender) return false;
  if (f.risk && (p.risk < f.risk[0] || p.risk > f.risk[1])) return false;
  return true;
}

export type AxisChoice =
  | { kind: "projection"; dim: 0 | 1 }
  | { kind: "age" }
  | { kind: "risk" }
  | { kind: "code"; code: number; label: string };

export class ViewState {
  overview: OverviewPayload | null = null;
  filters: Filters = emptyFilters();
  selection: string[] = [];
  selectedPatient: string | null = null;
  draftScript: EditOp[] = [];
  pendingSteering: SteeringSelection[] = [];
  previewId: string | null = null;
  xAxis: AxisChoice = { kind: "projection", dim: 0 };
  yAxis: AxisChoice = { kind: "projection", dim: 1 };

  setOverview(payload: OverviewPayload): void {
    this.overview = payload;
    this.selection = payload.patients.map((p) => p.id);
  }

  clearFilters(): void {
    this.filters = emptyFilters();
    this.selection = this.overview ? this.overview.patients.map((p) => p.id) : [];
  }

  /** Editor draft manipulation; the draft is sent only on "what if". */
  pushEdit(op: EditOp): void {
    this.draftScript.push(op);
  }

  resetDraft(): void {
    this.draftScript = [];
  }

  toggleSteering(sel: SteeringSelection): void {
    const i = this.pendingSteering.findIndex(
      (s) => s.visit === sel.visit && s.code === sel.code,
    );
    if (i >= 0) this.pendingSteering.splice(i, 1);
    else this.pendingSteering.push(sel);
  }

  cancelPreview(): void {
    this.previewId = null;
  }
}
