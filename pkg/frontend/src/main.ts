/**
 * Browser entry point: wires the five views to the service API. Lasso
 * and filter widgets update ViewState and re-query /select; patient
 * clicks open the detail and editor panels.
 */

import { WorkbenchClient } from "./api.js";
import { renderScene } from "./dom.js";
import { ViewState, filtersToRequest } from "./state.js";
import {
  ageAreaScene,
  codeBarScene,
  genderBarScene,
  lassoPolygon,
  overviewScene,
  riskCircleScene,
} from "./views/overview.js";
import { patientListScene, sortPatients } from "./views/patientList.js";
import { riskLineScene, temporalCodeScene, topNineScene } from "./views/patientDetail.js";
import { EditorSession, overlayScene } from "./views/editor.js";

function container(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing container #${id}`);
  node.innerHTML = "";
  return node;
}

export async function boot(base = ""): Promise<void> {
  const client = new WorkbenchClient(base);
  const state = new ViewState();
  state.setOverview(await client.overview());

  async function refreshOverview(): Promise<void> {
    const data = state.overview!;
    const selected = new Set(state.selection);
    renderScene(overviewScene(data, selected, state.xAxis, state.yAxis), container("overview"));
    const summary = await client.summary(data.patients.map((p) => p.id));
    const overlay =
      state.selection.length && state.selection.length < data.patients.length
        ? await client.summary(state.selection)
        : null;
    renderScene(codeBarScene(summary, overlay), container("code-bars"));
    renderScene(genderBarScene(data.patients, selected), container("gender-bars"));
    renderScene(ageAreaScene(data.patients, selected), container("age-area"));
    renderScene(
      riskCircleScene(summary.table.mean_risk, overlay ? overlay.table.mean_risk : null),
      container("risk-circle"),
    );
  }

  async function applyLasso(path: [number, number][]): Promise<void> {
    state.filters.polygon = lassoPolygon(path);
    const res = await client.select(filtersToRequest(state.filters));
    state.selection = res.ids;
    await refreshOverview();
    await refreshList();
  }

  async function refreshList(): Promise<void> {
    const details = await Promise.all(state.selection.map((id) => client.patient(id)));
    renderScene(patientListScene(sortPatients(details, { by: "risk" })), container("patient-list"));
  }

  async function openPatient(id: string): Promise<void> {
    state.selectedPatient = id;
    const detail = await client.patient(id);
    renderScene(riskLineScene(detail), container("risk-line"));
    renderScene(temporalCodeScene(detail), container("temporal-codes"));
    const summary = await client.summary([id]);
    renderScene(topNineScene(summary.top_contributors), container("top-nine"));
  }

  async function runWhatIf(session: EditorSession): Promise<void> {
    const result = await session.runWhatIf();
    renderScene(overlayScene(result), container("whatif-overlay"));
  }

  const w = window as unknown as Record<string, unknown>;
  w.workbench = {
    client,
    state,
    refreshOverview,
    applyLasso,
    refreshList,
    openPatient,
    runWhatIf,
    makeEditor: (id: string) => new EditorSession(client, id),
  };
  await refreshOverview();
}

if (typeof document !== "undefined" && document.getElementById("overview")) {
  void boot();
}
