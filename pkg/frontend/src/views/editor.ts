/**
 * Patient editor: drag visits along the time axis (move-visit edits),
 * add/remove codes, mark codes for steering, then run what-if or a
 * retrain preview. The what-if overlay draws the original and edited
 * risk curves on the same axes; nothing is committed until the explicit
 * commit action succeeds.
 */

import {
  EditOp,
  PatientDetailPayload,
  RetrainPayload,
  SteeringSelection,
  WhatIfPayload,
  WorkbenchClient,
} from "../api.js";
import { LinearScale, Mark, Scene } from "../scene.js";

const CHART = { width: 540, height: 160, pad: 24 };

export function overlayScene(result: WhatIfPayload): Scene {
  const nBefore = result.before.risk_curve.length;
  const nAfter = result.after.risk_curve.length;
  const n = Math.max(nBefore, nAfter, 2);
  const sx = new LinearScale(0, n - 1, CHART.pad, CHART.width - CHART.pad);
  const sy = new LinearScale(0, 1, CHART.height - CHART.pad, CHART.pad);
  const toPts = (curve: number[]): [number, number][] =>
    curve.map((y, t) => [sx.map(t), sy.map(y)]);
  const marks: Mark[] = [
    {
      type: "path",
      key: "overlay-before",
      x: 0,
      y: 0,
      points: toPts(result.before.risk_curve),
      stroke: "#888",
      fill: "none",
    },
    {
      type: "path",
      key: "overlay-after",
      x: 0,
      y: 0,
      points: toPts(result.after.risk_curve),
      stroke: "#d62728",
      dashed: true,
      fill: "none",
    },
  ];
  result.before.risk_curve.forEach((y, t) =>
    marks.push({
      type: "circle",
      key: `overlay-before-pt:${t}`,
      x: sx.map(t),
      y: sy.map(y),
      r: 2.5,
      fill: "#888",
      value: y,
    }),
  );
  result.after.risk_curve.forEach((y, t) =>
    marks.push({
      type: "circle",
      key: `overlay-after-pt:${t}`,
      x: sx.map(t),
      y: sy.map(y),
      r: 2.5,
      fill: "#d62728",
      value: y,
    }),
  );
  return { width: CHART.width, height: CHART.height, marks };
}

export type CodeSort = "score" | "kind";

export function sortVisitCodes(
  detail: PatientDetailPayload,
  visit: number,
  by: CodeSort = "score",
): PatientDetailPayload["visits"][number]["codes"] {
  const codes = [...detail.visits[visit].codes];
  if (by === "score") codes.sort((a, b) => b.score - a.score);
  else codes.sort((a, b) => a.kind.localeCompare(b.kind) || b.score - a.score);
  return codes;
}

/** Drag a visit box to a new day: emits the corresponding edit op. */
export function moveVisitOp(visit: number, newDay: number): EditOp {
  if (newDay < 0) throw new Error("day must be non-negative");
  return { op: "move_visit", visit, day: Math.round(newDay) };
}

export class EditorSession {
  draft: EditOp[] = [];
  steering: SteeringSelection[] = [];
  lastWhatIf: WhatIfPayload | null = null;
  lastPreview: RetrainPayload | null = null;

  constructor(
    private client: WorkbenchClient,
    readonly patientId: string,
  ) {}

  async runWhatIf(): Promise<WhatIfPayload> {
    this.lastWhatIf = await this.client.whatIf(this.patientId, this.draft);
    return this.lastWhatIf;
  }

  async runPreview(): Promise<RetrainPayload> {
    if (this.steering.length === 0) throw new Error("no steering selections");
    this.lastPreview = await this.client.retrainPreview(this.patientId, this.steering);
    return this.lastPreview;
  }

  /** Drop the preview without publishing; the server model is untouched. */
  cancelPreview(): void {
    this.lastPreview = null;
  }

  async commitPreview(): Promise<number> {
    if (!this.lastPreview) throw new Error("nothing previewed");
    const res = await this.client.retrainCommit(this.patientId, this.lastPreview.preview_id);
    this.lastPreview = null;
    return res.model_version;
  }
}
