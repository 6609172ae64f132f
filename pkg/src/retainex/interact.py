"""What-if editing of a patient record with full recomputation, and
user-steered retraining.

Steering minimizes exp(-s_pos + s_neg), where s_pos / s_neg sum the
contribution scores the user marked to increase / decrease, by plain
gradient descent restricted to the context embedding (W_emb_b, or the
shared embedding for the reverse-order baseline). The attention weights
depend only on the other embedding and the recurrent parameters, so alpha
and beta for the steered record are bit-identical before and after.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .data import CodeVocabulary, PatientRecord, VisitRecord, encode_patient
from .interpret import ContributionMatrix, code_contributions, prefix_risk_curve
from .model import ModelParams, forward
from .numerics import ArgumentError, NumericError

__all__ = [
    "EditError",
    "AddCode",
    "RemoveCode",
    "MoveVisit",
    "AddVisit",
    "RemoveVisit",
    "EditScript",
    "apply_edits",
    "WhatIfResult",
    "what_if",
    "Selection",
    "RetrainRequest",
    "RetrainReport",
    "retrain",
]


class EditError(ValueError):
    """An edit operation cannot be applied to the record; the message
    names the offending operation."""


@dataclass(frozen=True)
class AddCode:
    visit: int
    code: int


@dataclass(frozen=True)
class RemoveCode:
    visit: int
    code: int


@dataclass(frozen=True)
class MoveVisit:
    visit: int
    new_day: int


@dataclass(frozen=True)
class AddVisit:
    day: int
    codes: tuple[int, ...]


@dataclass(frozen=True)
class RemoveVisit:
    visit: int


EditOp = AddCode | RemoveCode | MoveVisit | AddVisit | RemoveVisit
EditScript = list


def _check_visit_index(visits: list, t: int, op) -> None:
    if not 0 <= t < len(visits):
        raise EditError(f"{op}: visit index {t} out of range (record has {len(visits)})")


def apply_edits(
    record: PatientRecord, script: list, vocab: CodeVocabulary
) -> PatientRecord:
    """Apply operations in order. Visits are re-sorted by day after each
    day-changing operation, and later indices address the re-sorted list.
    The edited record must keep at least one visit."""
    C = len(vocab)
    visits: list[tuple[int, set[int]]] = [
        (v.day, set(v.codes)) for v in record.visits
    ]
    for op in script:
        if isinstance(op, (AddCode, RemoveCode)):
            _check_visit_index(visits, op.visit, op)
            if not 0 <= op.code < C:
                raise EditError(f"{op}: unknown code id {op.code}")
            day, codes = visits[op.visit]
            if isinstance(op, AddCode):
                if op.code in codes:
                    raise EditError(f"{op}: code already present in visit")
                codes.add(op.code)
            else:
                if op.code not in codes:
                    raise EditError(f"{op}: code not present in visit")
                if len(codes) == 1:
                    raise EditError(f"{op}: removing the visit's last code")
                codes.remove(op.code)
        elif isinstance(op, MoveVisit):
            _check_visit_index(visits, op.visit, op)
            if op.new_day < 0:
                raise EditError(f"{op}: day must be non-negative")
            day, codes = visits[op.visit]
            visits[op.visit] = (op.new_day, codes)
            visits.sort(key=lambda x: x[0])
        elif isinstance(op, AddVisit):
            if op.day < 0:
                raise EditError(f"{op}: day must be non-negative")
            if not op.codes:
                raise EditError(f"{op}: a visit needs at least one code")
            if any(not 0 <= c < C for c in op.codes):
                raise EditError(f"{op}: unknown code id")
            visits.append((op.day, set(op.codes)))
            visits.sort(key=lambda x: x[0])
        elif isinstance(op, RemoveVisit):
            _check_visit_index(visits, op.visit, op)
            if len(visits) == 1:
                raise EditError(f"{op}: removing the last visit")
            visits.pop(op.visit)
        else:
            raise EditError(f"unknown edit operation {op!r}")
    visits.sort(key=lambda x: x[0])
    return PatientRecord(
        patient_id=record.patient_id,
        age=record.age,
        gender=record.gender,
        visits=tuple(VisitRecord(day=d, codes=tuple(cs)) for d, cs in visits),
        label=record.label,
        group_id=record.group_id,
    )


@dataclass
class Snapshot:
    """One model evaluation of a record: prediction, prefix curve, and the
    contribution decomposition."""

    y_hat: float
    risk_curve: list[float]
    contributions: ContributionMatrix


def _snapshot(params: ModelParams, record: PatientRecord, vocab: CodeVocabulary) -> Snapshot:
    enc = encode_patient(record, vocab)
    trace = forward(params, enc)
    return Snapshot(
        y_hat=trace.y_hat,
        risk_curve=prefix_risk_curve(params, enc),
        contributions=code_contributions(trace, params),
    )


@dataclass
class WhatIfResult:
    before: Snapshot
    after: Snapshot
    edited: PatientRecord


def what_if(
    params: ModelParams, record: PatientRecord, script: list, vocab: CodeVocabulary
) -> WhatIfResult:
    """Re-run the model on the edited record. Model parameters are never
    touched; the original record's outputs are reported unchanged."""
    before = _snapshot(params, record, vocab)
    edited = apply_edits(record, script, vocab)
    after = _snapshot(params, edited, vocab)
    return WhatIfResult(before=before, after=after, edited=edited)


@dataclass(frozen=True)
class Selection:
    visit: int
    code: int
    direction: str  # "increase" | "decrease"

    def __post_init__(self):
        if self.direction not in ("increase", "decrease"):
            raise ArgumentError(f"direction must be increase/decrease, got {self.direction!r}")


@dataclass(frozen=True)
class RetrainRequest:
    selections: tuple[Selection, ...]
    iterations: int = 20
    learning_rate: float = 0.01

    def __post_init__(self):
        if not self.selections:
            raise ArgumentError("steering needs at least one selection")
        if not 1 <= self.iterations <= 100:
            raise ArgumentError("iterations must lie in 1..100")
        if self.learning_rate <= 0:
            raise ArgumentError("learning rate must be positive")


@dataclass
class RetrainReport:
    losses: list[float]
    before: Snapshot
    after: Snapshot
    s_pos_before: float
    s_pos_after: float
    s_neg_before: float
    s_neg_after: float
    seconds: float


def _selected_sums(matrix: ContributionMatrix, request: RetrainRequest) -> tuple[float, float]:
    pos = sum(
        matrix.entries[(s.visit, s.code)]
        for s in request.selections
        if s.direction == "increase"
    )
    neg = sum(
        matrix.entries[(s.visit, s.code)]
        for s in request.selections
        if s.direction == "decrease"
    )
    return pos, neg


def retrain(
    params: ModelParams,
    record: PatientRecord,
    request: RetrainRequest,
    vocab: CodeVocabulary,
) -> tuple[ModelParams, RetrainReport]:
    """Gradient-descend exp(-s_pos + s_neg) over the context-embedding
    columns of the selected codes, on a copy of the model. The loss and
    the selected sums are recomputed from a fresh forward pass each
    iteration. Returns (updated copy, report); the input model is left
    untouched."""
    if params.variant == "gru":
        raise ArgumentError("the gru baseline cannot be steered")
    emb_name = "W_emb_b" if params.variant != "retain" else "W_emb"
    enc = encode_patient(record, vocab)
    active = {(t, c) for t, cs in enumerate(enc.codes) for c in cs}
    for s in request.selections:
        if (s.visit, s.code) not in active:
            raise ArgumentError(
                f"selection ({s.visit}, {s.code}) is not an active code of the record"
            )
    tic = time.perf_counter()
    before = _snapshot(params, record, vocab)
    updated = params.copy()
    W = updated.store[emb_name]
    w_out = updated.store["w_out"]
    losses: list[float] = []
    for it in range(request.iterations):
        trace = forward(updated, enc)
        matrix = code_contributions(trace, updated)
        s_pos, s_neg = _selected_sums(matrix, request)
        l_retrain = math.exp(-s_pos + s_neg)
        if not math.isfinite(l_retrain):
            raise NumericError(f"steering loss diverged at iteration {it}")
        losses.append(l_retrain)
        # d s_{t,c} / d W[:, c] = alpha_t * (w_out * beta_t); the loss
        # multiplies that by -L for increases and +L for decreases.
        grad_cols: dict[int, np.ndarray] = {}
        for s in request.selections:
            sign = -1.0 if s.direction == "increase" else 1.0
            g = sign * l_retrain * trace.alpha[s.visit] * (w_out * trace.beta[s.visit])
            if s.code in grad_cols:
                grad_cols[s.code] += g
            else:
                grad_cols[s.code] = g.copy()
        for c, g in grad_cols.items():
            W[:, c] -= request.learning_rate * g
    after = _snapshot(updated, record, vocab)
    pos_a, neg_a = _selected_sums(after.contributions, request)
    report = RetrainReport(
        losses=losses,
        before=before,
        after=after,
        s_pos_before=before and _selected_sums(before.contributions, request)[0],
        s_pos_after=pos_a,
        s_neg_before=_selected_sums(before.contributions, request)[1],
        s_neg_after=neg_a,
        seconds=time.perf_counter() - tic,
    )
    return updated, report
