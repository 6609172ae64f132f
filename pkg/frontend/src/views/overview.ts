/**
 * Cohort overview: the projection scatter with switchable axes and lasso
 * selection, plus four side charts (top-contributor bars, gender bars,
 * age distribution, mean-risk circle) that overlay the current selection
 * on the full-cohort base distributions.
 */

import { OverviewPayload, PatientSummary, SummaryPayload } from "../api.js";
import { RiskScale } from "../color.js";
import { LinearScale, Mark, Scene } from "../scene.js";
import { AxisChoice } from "../state.js";

const SCATTER = { width: 420, height: 420, pad: 20 };
const SIDE = { width: 200, barHeight: 18 };

function axisValue(p: PatientSummary, points: [number, number][], idx: number, axis: AxisChoice): number {
  switch (axis.kind) {
    case "projection":
      return points[idx][axis.dim];
    case "age":
      return p.age;
    case "risk":
      return p.risk;
    case "code": {
      const v = p.code_scores?.[String(axis.code)];
      if (v === undefined) {
        throw new Error(`overview was not fetched with code ${axis.code}; pass it to client.overview()`);
      }
      return v;
    }
  }
}

export function overviewScene(
  data: OverviewPayload,
  selected: Set<string>,
  xAxis: AxisChoice = { kind: "projection", dim: 0 },
  yAxis: AxisChoice = { kind: "projection", dim: 1 },
): Scene {
  const risk = new RiskScale();
  const xs = data.patients.map((p, i) => axisValue(p, data.projection.points, i, xAxis));
  const ys = data.patients.map((p, i) => axisValue(p, data.projection.points, i, yAxis));
  const sx = LinearScale.fromValues(xs, SCATTER.pad, SCATTER.width - SCATTER.pad);
  const sy = LinearScale.fromValues(ys, SCATTER.height - SCATTER.pad, SCATTER.pad);
  const marks: Mark[] = data.patients.map((p, i) => ({
    type: "circle",
    key: `point:${p.id}`,
    x: sx.map(xs[i]),
    y: sy.map(ys[i]),
    r: selected.has(p.id) ? 4 : 2.5,
    fill: risk.color(p.risk),
    stroke: selected.has(p.id) ? "#222" : "#bbb",
    value: p.risk,
    tooltip: `${p.id}: risk ${p.risk}`,
  }));
  return { width: SCATTER.width, height: SCATTER.height, marks };
}

/** Top-contributor bars; dotted overlay bars show the selection means. */
export function codeBarScene(base: SummaryPayload, selectionOverlay: SummaryPayload | null): Scene {
  const entries = base.top_contributors.slice(0, 3);
  const overlay = selectionOverlay?.top_contributors ?? [];
  const max = Math.max(
    ...entries.map((e) => Math.abs(e.score)),
    ...overlay.map((e) => Math.abs(e.score)),
    1e-12,
  );
  const scale = new LinearScale(0, max, 0, SIDE.width - 70);
  const marks: Mark[] = [];
  entries.forEach((e, i) => {
    marks.push({
      type: "rect",
      key: `codebar:${e.code}`,
      x: 60,
      y: i * (SIDE.barHeight + 6),
      width: scale.map(Math.abs(e.score)),
      height: SIDE.barHeight,
      fill: "#888",
      value: e.score,
      tooltip: `${e.label}: ${e.score}`,
    });
    marks.push({
      type: "text",
      key: `codebar-label:${e.code}`,
      x: 0,
      y: i * (SIDE.barHeight + 6) + 13,
      text: e.label,
    });
    const over = overlay.find((o) => o.code === e.code);
    if (over) {
      marks.push({
        type: "rect",
        key: `codebar-overlay:${e.code}`,
        x: 60,
        y: i * (SIDE.barHeight + 6) + 4,
        width: scale.map(Math.abs(over.score)),
        height: SIDE.barHeight - 8,
        fill: "none",
        stroke: "#d62728",
        dashed: true,
        value: over.score,
      });
    }
  });
  return { width: SIDE.width, height: 3 * (SIDE.barHeight + 6), marks };
}

export function genderBarScene(
  patients: PatientSummary[],
  selectedIds: Set<string>,
): Scene {
  const counts = { F: 0, M: 0 };
  const selCounts = { F: 0, M: 0 };
  for (const p of patients) {
    counts[p.gender] += 1;
    if (selectedIds.has(p.id)) selCounts[p.gender] += 1;
  }
  const max = Math.max(counts.F, counts.M, 1);
  const scale = new LinearScale(0, max, 0, SIDE.width - 40);
  const marks: Mark[] = [];
  (["F", "M"] as const).forEach((g, i) => {
    marks.push({
      type: "rect",
      key: `gender:${g}`,
      x: 30,
      y: i * (SIDE.barHeight + 6),
      width: scale.map(counts[g]),
      height: SIDE.barHeight,
      fill: "#888",
      value: counts[g],
    });
    marks.push({
      type: "rect",
      key: `gender-selected:${g}`,
      x: 30,
      y: i * (SIDE.barHeight + 6) + 3,
      width: scale.map(selCounts[g]),
      height: SIDE.barHeight - 6,
      fill: "#f2c744",
      value: selCounts[g],
    });
  });
  return { width: SIDE.width, height: 2 * (SIDE.barHeight + 6), marks };
}

export function ageAreaScene(
  patients: PatientSummary[],
  selectedIds: Set<string>,
  binWidth = 10,
): Scene {
  const bins = new Map<number, { all: number; sel: number }>();
  for (const p of patients) {
    const b = Math.floor(p.age / binWidth) * binWidth;
    const e = bins.get(b) ?? { all: 0, sel: 0 };
    e.all += 1;
    if (selectedIds.has(p.id)) e.sel += 1;
    bins.set(b, e);
  }
  const keys = [...bins.keys()].sort((a, b) => a - b);
  const max = Math.max(...[...bins.values()].map((e) => e.all), 1);
  const sx = LinearScale.fromValues(keys, 10, SIDE.width - 10);
  const sy = new LinearScale(0, max, 80, 4);
  const marks: Mark[] = [
    {
      type: "path",
      key: "age-area",
      x: 0,
      y: 0,
      points: keys.map((k) => [sx.map(k), sy.map(bins.get(k)!.all)]),
      stroke: "#888",
      fill: "none",
    },
    {
      type: "path",
      key: "age-area-selected",
      x: 0,
      y: 0,
      points: keys.map((k) => [sx.map(k), sy.map(bins.get(k)!.sel)]),
      stroke: "#f2c744",
      fill: "none",
    },
  ];
  keys.forEach((k) => {
    marks.push({
      type: "circle",
      key: `age-bin:${k}`,
      x: sx.map(k),
      y: sy.map(bins.get(k)!.all),
      r: 2,
      value: bins.get(k)!.all,
    });
  });
  return { width: SIDE.width, height: 90, marks };
}

/** Mean predicted risk as the fill level of a circle gauge; the dotted
 * line overlays the selection mean from the server summary. */
export function riskCircleScene(
  baseMeanRisk: number,
  selectionMeanRisk: number | null,
): Scene {
  const r = 36;
  const cx = SIDE.width / 2;
  const cy = 45;
  const marks: Mark[] = [
    { type: "circle", key: "risk-gauge-outline", x: cx, y: cy, r, fill: "none", stroke: "#555" },
    {
      type: "rect",
      key: "risk-gauge-fill",
      x: cx - r,
      y: cy + r - 2 * r * baseMeanRisk,
      width: 2 * r,
      height: 2 * r * baseMeanRisk,
      fill: "#d62728",
      value: baseMeanRisk,
      tooltip: `mean risk ${baseMeanRisk}`,
    },
  ];
  if (selectionMeanRisk !== null) {
    marks.push({
      type: "line",
      key: "risk-gauge-selection",
      x: cx - r,
      y: cy + r - 2 * r * selectionMeanRisk,
      x2: cx + r,
      y2: cy + r - 2 * r * selectionMeanRisk,
      stroke: "#222",
      dashed: true,
      value: selectionMeanRisk,
    });
  }
  return { width: SIDE.width, height: 95, marks };
}

/** Lasso helper: closes the polygon and submits it as the /select filter. */
export function lassoPolygon(path: [number, number][]): [number, number][] {
  if (path.length < 3) throw new Error("lasso needs at least 3 vertices");
  return path;
}
