/**
 * Patient list: one row per patient, one cell per visit colored by the
 * visit's contribution sum on the shared diverging scale, and a terminal
 * circle filled by the predicted risk. Rows sort by visit count, risk,
 * or one code's contribution (server-provided S values).
 */

import { PatientDetailPayload } from "../api.js";
import { DivergingScale, RiskScale } from "../color.js";
import { Mark, Scene } from "../scene.js";

export const CELL = 16;
export const GAP = 2;
/** Rows scroll horizontally past this many visits. */
export const VISIT_SCROLL_LIMIT = 60;

export type SortKey =
  | { by: "visits" }
  | { by: "risk" }
  | { by: "code"; scores: Map<string, number> };

export function sortPatients(
  details: PatientDetailPayload[],
  key: SortKey,
  descending = true,
): PatientDetailPayload[] {
  const sorted = [...details];
  const val = (d: PatientDetailPayload): number => {
    switch (key.by) {
      case "visits":
        return d.visits.length;
      case "risk":
        return d.risk;
      case "code":
        return key.scores.get(d.id) ?? 0;
    }
  };
  sorted.sort((a, b) => (descending ? val(b) - val(a) : val(a) - val(b)));
  return sorted;
}

export function patientListScene(details: PatientDetailPayload[]): Scene {
  const allSums = details.flatMap((d) => d.visit_sums);
  const scale = DivergingScale.fromValues(allSums);
  const risk = new RiskScale();
  const marks: Mark[] = [];
  const maxVisits = Math.max(0, ...details.map((d) => d.visits.length));
  details.forEach((d, row) => {
    const y = row * (CELL + GAP);
    d.visit_sums.forEach((s, t) => {
      marks.push({
        type: "rect",
        key: `cell:${d.id}:${t}`,
        x: t * (CELL + GAP),
        y,
        width: CELL,
        height: CELL,
        fill: scale.color(s),
        value: s,
        tooltip: `${d.id} visit ${t}: ${s}`,
      });
    });
    marks.push({
      type: "circle",
      key: `risk:${d.id}`,
      x: maxVisits * (CELL + GAP) + CELL,
      y: y + CELL / 2,
      r: CELL / 2,
      fill: risk.color(d.risk),
      value: d.risk,
      tooltip: `${d.id}: risk ${d.risk}`,
    });
  });
  return {
    width: Math.min(maxVisits, VISIT_SCROLL_LIMIT) * (CELL + GAP) + 3 * CELL,
    height: details.length * (CELL + GAP),
    marks,
  };
}
