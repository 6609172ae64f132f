"""HTTP/JSON service for the workbench UI.

Endpoints (all JSON):

* ``GET  /health``                        liveness probe
* ``GET  /overview``                      projection coords + per-patient risk/age/gender
* ``POST /select``                        conjunctive filters -> patient ids + summary stats
* ``GET  /summary?ids=a,b``               cohort table, top-9 contributors, temporal summary
* ``GET  /patients/{id}``                 record, contribution matrix, prefix risk curve
* ``POST /patients/{id}/whatif``          edit script -> before/after comparison
* ``POST /patients/{id}/retrain/preview`` steering request -> report + preview id
* ``POST /patients/{id}/retrain/commit``  atomically publish a previewed model
* ``GET  /aggregates``                    cohort s1/s2 export with code labels

Every error path carries one machine code: validation_error, edit_error,
cap_exceeded (all 400), unknown_patient (404), commit_conflict (409),
numeric_error and projection_timeout (500). /whatif and /retrain/preview
never mutate the published model; only /retrain/commit does, atomically
under the state lock.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .data import CodeVocabulary, Dataset, PatientRecord, encode_patient
from .interact import (
    AddCode,
    AddVisit,
    EditError,
    MoveVisit,
    RemoveCode,
    RemoveVisit,
    RetrainRequest,
    Selection,
    Snapshot,
    retrain,
    what_if,
)
from .interpret import (
    PatientEmbedding,
    code_contributions,
    cohort_aggregates,
    patient_embedding,
    prefix_risk_curve,
    temporal_summary,
    top_contributors,
)
from .model import ModelParams, forward
from .numerics import ArgumentError, NumericError
from .projection import ProjectionConfig, project

__all__ = ["ApiError", "ServeSettings", "SessionState", "create_app", "points_in_polygon"]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class ServeSettings:
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    projection_cap: int = 5000
    projection_timeout_s: float = 600.0
    accuracy_threshold: float = 0.5
    max_previews: int = 32

    @staticmethod
    def from_file(path) -> "ServeSettings":
        with open(path) as fh:
            obj = json.load(fh)
        proj = obj.get("projection", {})
        return ServeSettings(
            projection=ProjectionConfig(
                method=proj.get("method", "tsne"),
                perplexity=proj.get("perplexity", 30.0),
                iterations=proj.get("iterations", 1000),
                seed=proj.get("seed", 0),
            ),
            projection_cap=obj.get("projection_cap", 5000),
            projection_timeout_s=obj.get("projection_timeout_s", 600.0),
            accuracy_threshold=obj.get("accuracy_threshold", 0.5),
        )


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Vectorized even-odd ray casting: a point is inside when a ray to
    the right crosses the boundary an odd number of times."""
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    k = len(poly)
    for i in range(k):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % k]
        straddles = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (x2 - x1) * (y - y1) / (y2 - y1) + x1
        inside ^= straddles & (x < x_cross)
    return inside


@dataclass
class _PatientCache:
    record: PatientRecord
    y_hat: float
    S: np.ndarray
    counts: np.ndarray
    matrix: object
    visit_sums: list


class SessionState:
    """Published model plus everything derived from it. The lock
    serializes recomputation and commits; reads of a consistent snapshot
    take the lock briefly."""

    def __init__(self, dataset: Dataset, params: ModelParams, settings: ServeSettings):
        if dataset.vocabulary is None:
            raise ArgumentError("serving needs a dataset with its vocabulary")
        self.dataset = dataset
        self.vocab: CodeVocabulary = dataset.vocabulary
        self.settings = settings
        self.lock = threading.RLock()
        self.model_version = 0
        self.params = params
        self.previews: dict[str, tuple[ModelParams, int, dict]] = {}
        self._preview_counter = 0
        self._projections: dict[tuple, dict] = {}
        self._executor = ThreadPoolExecutor(max_workers=1)
        self.by_id: dict[str, _PatientCache] = {}
        self._recompute()

    def _recompute(self) -> None:
        by_id = {}
        for rec in self.dataset.patients:
            enc = encode_patient(rec, self.vocab)
            trace = forward(self.params, enc)
            matrix = code_contributions(trace, self.params)
            emb = patient_embedding(matrix, len(self.vocab))
            by_id[rec.patient_id] = _PatientCache(
                record=rec,
                y_hat=trace.y_hat,
                S=emb.S,
                counts=emb.counts,
                matrix=matrix,
                visit_sums=matrix.visit_sums,
            )
        self.by_id = by_id
        self._projections.clear()

    def patient(self, pid: str) -> _PatientCache:
        entry = self.by_id.get(pid)
        if entry is None:
            raise ApiError(404, "unknown_patient", f"no patient with id {pid!r}")
        return entry

    def s_matrix(self) -> np.ndarray:
        return np.stack([self.by_id[p.patient_id].S for p in self.dataset.patients])

    def projection(self) -> dict:
        cfg = self.settings.projection
        with self.lock:
            cached = self._projections.get(cfg.key())
            if cached is not None:
                return cached
            n = len(self.dataset.patients)
            if n > self.settings.projection_cap:
                raise ApiError(
                    400,
                    "cap_exceeded",
                    f"projection capped at {self.settings.projection_cap} patients, got {n}",
                )
            S = self.s_matrix()
            future = self._executor.submit(project, S, cfg)
            try:
                emb = future.result(timeout=self.settings.projection_timeout_s)
            except FutureTimeout:
                raise ApiError(500, "projection_timeout", "projection did not finish in time")
            except ArgumentError as exc:
                raise ApiError(400, "validation_error", str(exc))
            out = {
                "method": emb.method,
                "points": emb.to_list(),
                "config": {
                    "method": cfg.method,
                    "perplexity": cfg.perplexity,
                    "iterations": cfg.iterations,
                    "seed": cfg.seed,
                },
            }
            self._projections[cfg.key()] = out
            return out

    def store_preview(self, params: ModelParams, report: dict) -> str:
        with self.lock:
            self._preview_counter += 1
            pid = f"preview-{self._preview_counter}"
            self.previews[pid] = (params, self.model_version, report)
            while len(self.previews) > self.settings.max_previews:
                self.previews.pop(next(iter(self.previews)))
            return pid

    def commit(self, preview_id: str) -> int:
        with self.lock:
            entry = self.previews.get(preview_id)
            if entry is None:
                raise ApiError(404, "unknown_patient", f"no preview {preview_id!r}")
            params, version, _ = entry
            if version != self.model_version:
                raise ApiError(
                    409,
                    "commit_conflict",
                    "the published model changed since this preview was made",
                )
            self.params = params
            self.model_version += 1
            self.previews.clear()
            self._recompute()
            return self.model_version


# ---------------------------------------------------------------------------
# Wire formats
# ---------------------------------------------------------------------------


class SelectFilter(BaseModel):
    polygon: list[list[float]] | None = None
    age: list[int] | None = None
    gender: str | None = None
    risk: list[float] | None = None
    codes: list[dict] | None = None  # [{code, range:[lo,hi]}]


class WhatIfBody(BaseModel):
    script: list[dict]


class SelectionBody(BaseModel):
    visit: int
    code: int
    direction: str


class RetrainBody(BaseModel):
    selections: list[SelectionBody]
    iterations: int = 20
    learning_rate: float = 0.01


class CommitBody(BaseModel):
    preview_id: str


_OP_PARSERS = {
    "add_code": lambda o: AddCode(int(o["visit"]), int(o["code"])),
    "remove_code": lambda o: RemoveCode(int(o["visit"]), int(o["code"])),
    "move_visit": lambda o: MoveVisit(int(o["visit"]), int(o["day"])),
    "add_visit": lambda o: AddVisit(int(o["day"]), tuple(int(c) for c in o["codes"])),
    "remove_visit": lambda o: RemoveVisit(int(o["visit"])),
}


def _parse_script(raw: list[dict]) -> list:
    ops = []
    for o in raw:
        kind = o.get("op")
        parser = _OP_PARSERS.get(kind)
        if parser is None:
            raise ApiError(400, "validation_error", f"unknown edit op {kind!r}")
        try:
            ops.append(parser(o))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, "validation_error", f"bad edit op {o!r}: {exc}")
    return ops


def _matrix_json(matrix) -> list[dict]:
    return [
        {"visit": t, "code": c, "score": v}
        for (t, c), v in sorted(matrix.entries.items())
    ]


def _snapshot_json(snap: Snapshot) -> dict:
    return {
        "risk": snap.y_hat,
        "risk_curve": snap.risk_curve,
        "visit_sums": snap.contributions.visit_sums,
        "contributions": _matrix_json(snap.contributions),
    }


def _record_json(rec: PatientRecord, vocab: CodeVocabulary) -> dict:
    return {
        "id": rec.patient_id,
        "age": rec.age,
        "gender": rec.gender,
        "label": rec.label,
        "group": rec.group_id,
        "visits": [
            {
                "day": v.day,
                "codes": [
                    {"code": c, "label": vocab.labels[c], "kind": vocab.kinds[c]}
                    for c in v.codes
                ],
            }
            for v in rec.visits
        ],
    }


def create_app(
    dataset: Dataset, params: ModelParams, settings: ServeSettings | None = None
) -> FastAPI:
    settings = settings or ServeSettings()
    state = SessionState(dataset, params, settings)
    app = FastAPI(title="risk workbench service")
    app.state.session = state

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(ArgumentError)
    async def _argument_error(_req: Request, exc: ArgumentError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "validation_error", "message": str(exc)}},
        )

    @app.exception_handler(EditError)
    async def _edit_error(_req: Request, exc: EditError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "edit_error", "message": str(exc)}},
        )

    @app.exception_handler(NumericError)
    async def _numeric_error(_req: Request, exc: NumericError):
        return JSONResponse(
            status_code=500,
            content={"error": {"code": "numeric_error", "message": str(exc)}},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/overview")
    def overview(codes: str | None = Query(default=None)):
        """Cohort overview. ``codes=3,17`` additionally returns those
        codes' per-patient contribution sums, for scatter axes by code."""
        proj = state.projection()
        code_ids: list[int] = []
        if codes:
            try:
                code_ids = [int(c) for c in codes.split(",") if c]
            except ValueError as exc:
                raise ApiError(400, "validation_error", f"bad codes list: {exc}")
            for c in code_ids:
                if not 0 <= c < len(state.vocab):
                    raise ApiError(400, "validation_error", f"unknown code {c}")
        with state.lock:
            patients = []
            for rec in state.dataset.patients:
                entry = state.by_id[rec.patient_id]
                row = {
                    "id": rec.patient_id,
                    "age": rec.age,
                    "gender": rec.gender,
                    "label": rec.label,
                    "risk": entry.y_hat,
                    "n_visits": rec.n_visits,
                }
                if code_ids:
                    row["code_scores"] = {str(c): float(entry.S[c]) for c in code_ids}
                patients.append(row)
        return {
            "patients": patients,
            "projection": proj,
            "model_version": state.model_version,
        }

    @app.post("/select")
    def select(body: SelectFilter):
        with state.lock:
            recs = state.dataset.patients
            keep = np.ones(len(recs), dtype=bool)
            if body.polygon is not None:
                if len(body.polygon) < 3:
                    raise ApiError(400, "validation_error", "polygon needs >= 3 vertices")
                pts = np.asarray(state.projection()["points"])
                keep &= points_in_polygon(pts, np.asarray(body.polygon))
            if body.age is not None:
                lo, hi = body.age
                keep &= np.array([lo <= r.age <= hi for r in recs])
            if body.gender is not None:
                if body.gender not in ("F", "M"):
                    raise ApiError(400, "validation_error", f"unknown gender {body.gender!r}")
                keep &= np.array([r.gender == body.gender for r in recs])
            if body.risk is not None:
                lo, hi = body.risk
                keep &= np.array(
                    [lo <= state.by_id[r.patient_id].y_hat <= hi for r in recs]
                )
            for axis in body.codes or []:
                try:
                    code = int(axis["code"])
                    lo, hi = axis["range"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise ApiError(400, "validation_error", f"bad code filter: {exc}")
                if not 0 <= code < len(state.vocab):
                    raise ApiError(400, "validation_error", f"unknown code {code}")
                keep &= np.array(
                    [lo <= state.by_id[r.patient_id].S[code] <= hi for r in recs]
                )
            chosen = [r for r, k in zip(recs, keep) if k]
            risks = [state.by_id[r.patient_id].y_hat for r in chosen]
            summary = {
                "count": len(chosen),
                "mean_risk": float(np.mean(risks)) if chosen else None,
                "mean_age": float(np.mean([r.age for r in chosen])) if chosen else None,
                "gender_counts": {
                    g: sum(1 for r in chosen if r.gender == g) for g in ("F", "M")
                },
                "n_cases": sum(r.label for r in chosen),
            }
            return {"ids": [r.patient_id for r in chosen], "summary": summary}

    @app.get("/summary")
    def summary(ids: str = Query(...)):
        id_list = [i for i in ids.split(",") if i]
        if not id_list:
            raise ApiError(400, "validation_error", "ids must name at least one patient")
        with state.lock:
            entries = [state.patient(pid) for pid in id_list]
            agg = cohort_aggregates(
                [PatientEmbedding(S=e.S, counts=e.counts) for e in entries]
            )
            top9 = top_contributors(
                agg.s1, state.vocab, k=3, group_by_kind=True, counts=agg.C_total
            )
            temporal = temporal_summary(
                [e.matrix for e in entries], [t["code"] for t in top9]
            )
            risks = [e.y_hat for e in entries]
            correct = sum(
                1
                for e in entries
                if (e.y_hat >= settings.accuracy_threshold) == bool(e.record.label)
            )
            table = {
                "n_patients": len(entries),
                "accuracy": correct / len(entries),
                "mean_risk": float(np.mean(risks)),
                "n_codes": int(sum(e.counts.sum() for e in entries)),
                "top_code": top9[0]["label"] if top9 else None,
                "total_contribution": float(sum(e.S.sum() for e in entries)),
            }
            return {
                "table": table,
                "top_contributors": top9,
                "temporal": {
                    "codes": temporal.codes,
                    "offsets": temporal.offsets,
                    "mean": temporal.mean.tolist(),
                    "std": temporal.std.tolist(),
                    "support": temporal.support.tolist(),
                },
            }

    @app.get("/patients/{pid}")
    def patient_detail(pid: str):
        with state.lock:
            entry = state.patient(pid)
            enc = encode_patient(entry.record, state.vocab)
            curve = prefix_risk_curve(state.params, enc)
            rec_json = _record_json(entry.record, state.vocab)
            for t, visit in enumerate(rec_json["visits"]):
                for code_obj in visit["codes"]:
                    code_obj["score"] = entry.matrix.entries[(t, code_obj["code"])]
            return {
                **rec_json,
                "risk": entry.y_hat,
                "risk_curve": curve,
                "visit_sums": entry.visit_sums,
                "contributions": _matrix_json(entry.matrix),
                "model_version": state.model_version,
            }

    @app.post("/patients/{pid}/whatif")
    def patient_whatif(pid: str, body: WhatIfBody):
        with state.lock:
            entry = state.patient(pid)
            script = _parse_script(body.script)
            result = what_if(state.params, entry.record, script, state.vocab)
            return {
                "before": _snapshot_json(result.before),
                "after": _snapshot_json(result.after),
                "edited": _record_json(result.edited, state.vocab),
            }

    @app.post("/patients/{pid}/retrain/preview")
    def retrain_preview(pid: str, body: RetrainBody):
        with state.lock:
            entry = state.patient(pid)
            request = RetrainRequest(
                selections=tuple(
                    Selection(s.visit, s.code, s.direction) for s in body.selections
                ),
                iterations=body.iterations,
                learning_rate=body.learning_rate,
            )
            updated, report = retrain(state.params, entry.record, request, state.vocab)
            report_json = {
                "losses": report.losses,
                "before": _snapshot_json(report.before),
                "after": _snapshot_json(report.after),
                "s_pos_before": report.s_pos_before,
                "s_pos_after": report.s_pos_after,
                "s_neg_before": report.s_neg_before,
                "s_neg_after": report.s_neg_after,
                "seconds": report.seconds,
            }
            preview_id = state.store_preview(updated, report_json)
            return {"preview_id": preview_id, "report": report_json}

    @app.post("/patients/{pid}/retrain/commit")
    def retrain_commit(pid: str, body: CommitBody):
        state.patient(pid)
        version = state.commit(body.preview_id)
        return {"committed": True, "model_version": version}

    @app.get("/aggregates")
    def aggregates():
        with state.lock:
            entries = list(state.by_id.values())
            agg = cohort_aggregates(
                [PatientEmbedding(S=e.S, counts=e.counts) for e in entries]
            )
            return agg.to_json_dict(state.vocab)

    return app
