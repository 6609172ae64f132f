/**
 * Single-patient detail: the prefix risk curve as a line chart, the
 * temporal code chart (one symbol per code per visit, vertical position
 * by contribution score, shape/color by kind), and the top-9 bars.
 * Hovering a visit index re-renders contributions for the prefix ending
 * there, fetched through the what-if endpoint with an empty edit script.
 */

import { ContributorEntry, PatientDetailPayload } from "../api.js";
import { KIND_COLORS, KIND_SYMBOLS } from "../color.js";
import { LinearScale, Mark, Scene } from "../scene.js";

const CHART = { width: 540, height: 160, pad: 24 };

export function riskLineScene(detail: PatientDetailPayload): Scene {
  const n = detail.risk_curve.length;
  const sx = new LinearScale(0, Math.max(n - 1, 1), CHART.pad, CHART.width - CHART.pad);
  const sy = new LinearScale(0, 1, CHART.height - CHART.pad, CHART.pad);
  const pts: [number, number][] = detail.risk_curve.map((y, t) => [sx.map(t), sy.map(y)]);
  const marks: Mark[] = [
    { type: "path", key: "risk-line", x: 0, y: 0, points: pts, stroke: "#d62728", fill: "none" },
  ];
  detail.risk_curve.forEach((y, t) => {
    marks.push({
      type: "circle",
      key: `risk-pt:${t}`,
      x: sx.map(t),
      y: sy.map(y),
      r: 3,
      fill: "#d62728",
      value: y,
      tooltip: `after visit ${t + 1}: ${y}`,
    });
  });
  return { width: CHART.width, height: CHART.height, marks };
}

export function temporalCodeScene(
  detail: PatientDetailPayload,
  uptoVisit: number | null = null,
): Scene {
  const limit = uptoVisit === null ? detail.visits.length - 1 : uptoVisit;
  const scores = detail.contributions
    .filter((c) => c.visit <= limit)
    .map((c) => c.score);
  const lim = Math.max(...scores.map(Math.abs), 1e-12);
  const sx = new LinearScale(
    0,
    Math.max(detail.visits.length - 1, 1),
    CHART.pad,
    CHART.width - CHART.pad,
  );
  const sy = new LinearScale(-lim, lim, CHART.height - CHART.pad, CHART.pad);
  const marks: Mark[] = [
    {
      type: "line",
      key: "zero-axis",
      x: CHART.pad,
      y: sy.map(0),
      x2: CHART.width - CHART.pad,
      y2: sy.map(0),
      stroke: "#ccc",
    },
  ];
  detail.visits.forEach((visit, t) => {
    if (t > limit) return;
    visit.codes.forEach((code) => {
      marks.push({
        type: "symbol",
        key: `code:${t}:${code.code}`,
        symbol: KIND_SYMBOLS[code.kind] ?? "rect",
        x: sx.map(t),
        y: sy.map(code.score),
        r: 4,
        fill: KIND_COLORS[code.kind] ?? "#444",
        value: code.score,
        tooltip: `${code.label} @ visit ${t}: ${code.score}`,
      });
    });
  });
  return { width: CHART.width, height: CHART.height, marks };
}

export function topNineScene(entries: ContributorEntry[]): Scene {
  const rows = entries.slice(0, 9);
  const lim = Math.max(...rows.map((e) => Math.abs(e.score)), 1e-12);
  const scale = new LinearScale(0, lim, 0, 160);
  const marks: Mark[] = [];
  rows.forEach((e, i) => {
    marks.push({
      type: "rect",
      key: `top9:${e.code}`,
      x: 120,
      y: i * 20,
      width: scale.map(Math.abs(e.score)),
      height: 16,
      fill: KIND_COLORS[e.kind] ?? "#444",
      value: e.score,
      tooltip: `${e.label}: ${e.score}`,
    });
    marks.push({
      type: "text",
      key: `top9-label:${e.code}`,
      x: 0,
      y: i * 20 + 12,
      text: e.label,
    });
  });
  return { width: 300, height: rows.length * 20, marks };
}
