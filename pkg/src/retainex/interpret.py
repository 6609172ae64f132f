"""Exact decomposition of the prediction score into per-(visit, code)
contributions, and the aggregates built on top of it: visit sums, patient
embedding vectors, cohort normalizations, temporal summaries aligned to
the final visit, and prefix risk curves.

Because the context vector is linear in the second embedding and the
output layer has no bias, the pre-sigmoid score s satisfies
s = sum over visits t and active codes c of
    alpha_t * (w_out . (W_b[:, c] * beta_t))
exactly (up to float summation order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CodeVocabulary, EncodedSequence, PatientRecord
from .model import ForwardTrace, ModelParams, forward
from .numerics import ArgumentError

__all__ = [
    "ContributionMatrix",
    "PatientEmbedding",
    "CohortAggregate",
    "TemporalSummary",
    "code_contributions",
    "visit_contributions",
    "patient_embedding",
    "cohort_aggregates",
    "temporal_summary",
    "prefix_risk_curve",
    "top_contributors",
]


@dataclass
class ContributionMatrix:
    """Scores s[(t, c)] for every active (visit, code) pair, plus the
    per-visit sums. Entries exist only where the code occurred."""

    entries: dict[tuple[int, int], float]
    visit_sums: list[float]
    n_visits: int

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def visit_codes(self, t: int) -> list[tuple[int, float]]:
        return sorted(
            ((c, v) for (tt, c), v in self.entries.items() if tt == t),
        )


def code_contributions(trace: ForwardTrace, params: ModelParams) -> ContributionMatrix:
    """s_{t,c} = alpha_t * (w_out . (col_c of the context embedding *
    beta_t)) for each active (t, c)."""
    if trace.variant == "gru":
        raise ArgumentError("the gru baseline has no attention decomposition")
    W_b = params.store["W_emb_b" if trace.variant != "retain" else "W_emb"]
    w_out = params.store["w_out"]
    entries: dict[tuple[int, int], float] = {}
    sums = []
    # w_out . (col_c * beta_t) == (w_out * beta_t) . col_c
    wb = trace.beta * w_out[None, :]  # (T, m)
    for t, codes in enumerate(trace.encoded.codes):
        a = trace.alpha[t]
        s_t = 0.0
        for c in codes:
            val = float(a * (wb[t] @ W_b[:, c]))
            entries[(t, c)] = val
            s_t += val
        sums.append(s_t)
    return ContributionMatrix(entries=entries, visit_sums=sums, n_visits=trace.encoded.length)


def visit_contributions(matrix: ContributionMatrix) -> list[float]:
    """Per-visit sums s_t = sum over active codes of s_{t,c}."""
    sums = [0.0] * matrix.n_visits
    for (t, _), v in matrix.entries.items():
        sums[t] += v
    return sums


@dataclass
class PatientEmbedding:
    """Length-C accumulation of a patient's contribution scores, plus how
    many visits contained each code."""

    S: np.ndarray
    counts: np.ndarray


def patient_embedding(matrix: ContributionMatrix, n_codes: int) -> PatientEmbedding:
    S = np.zeros(n_codes)
    counts = np.zeros(n_codes, dtype=np.int64)
    for (_, c), v in matrix.entries.items():
        S[c] += v
        counts[c] += 1
    return PatientEmbedding(S=S, counts=counts)


@dataclass
class CohortAggregate:
    """Cohort sums and the two normalizations: per patient count (s1) and
    per occurrence count (s2). Positions with zero occurrences have no
    defined s2 and are exported as nulls, never as zero."""

    S_total: np.ndarray
    C_total: np.ndarray
    n_patients: int

    @property
    def s1(self) -> np.ndarray:
        return self.S_total / self.n_patients

    def s2(self) -> np.ndarray:
        """Masked array; invalid where a code never occurred."""
        out = np.ma.masked_all(self.S_total.shape)
        seen = self.C_total > 0
        out[seen] = self.S_total[seen] / self.C_total[seen]
        return out

    def to_json_dict(self, vocab: CodeVocabulary | None = None) -> dict:
        s2 = self.s2()
        return {
            "n_patients": self.n_patients,
            "s1": self.s1.tolist(),
            "s2": [None if m else float(v) for v, m in zip(s2.data, s2.mask)],
            "counts": self.C_total.tolist(),
            "labels": vocab.labels if vocab else None,
        }


def cohort_aggregates(embeddings: list[PatientEmbedding]) -> CohortAggregate:
    if not embeddings:
        raise ArgumentError("cannot aggregate an empty cohort")
    C = embeddings[0].S.shape[0]
    if any(e.S.shape[0] != C for e in embeddings):
        raise ArgumentError("inconsistent embedding widths")
    S_total = np.zeros(C)
    C_total = np.zeros(C, dtype=np.int64)
    for e in embeddings:
        S_total += e.S
        C_total += e.counts
    return CohortAggregate(S_total=S_total, C_total=C_total, n_patients=len(embeddings))


@dataclass
class TemporalSummary:
    """Per selected code, statistics of its contribution at each offset
    back from the final visit (offset 0 = last visit). A patient
    participates at offset k when it has a visit there; an absent code at
    that visit contributes 0. Standard deviation is the population form,
    zero at support 1."""

    codes: list[int]
    offsets: list[int]
    mean: np.ndarray  # (codes, offsets)
    std: np.ndarray
    support: np.ndarray  # patients with a visit at each offset


def temporal_summary(
    matrices: list[ContributionMatrix], codes: list[int], max_codes: int = 9
) -> TemporalSummary:
    if len(codes) > max_codes:
        raise ArgumentError(f"at most {max_codes} codes in a temporal summary")
    if not matrices:
        raise ArgumentError("temporal summary needs at least one patient")
    max_T = max(m.n_visits for m in matrices)
    offsets = list(range(max_T))
    support = np.zeros(max_T, dtype=np.int64)
    acc = np.zeros((len(codes), max_T))
    acc2 = np.zeros((len(codes), max_T))
    for m in matrices:
        for k in range(m.n_visits):
            t = m.n_visits - 1 - k
            support[k] += 1
            for ci, c in enumerate(codes):
                v = m.entries.get((t, c), 0.0)
                acc[ci, k] += v
                acc2[ci, k] += v * v
    mean = np.zeros_like(acc)
    std = np.zeros_like(acc)
    seen = support > 0
    mean[:, seen] = acc[:, seen] / support[seen]
    var = np.maximum(acc2[:, seen] / support[seen] - mean[:, seen] ** 2, 0.0)
    std[:, seen] = np.sqrt(var)
    return TemporalSummary(
        codes=list(codes), offsets=offsets, mean=mean, std=std, support=support
    )


def prefix_risk_curve(params: ModelParams, encoded: EncodedSequence) -> list[float]:
    """Prediction using only the first t visits, for t = 1..T. Each prefix
    is a fresh forward pass: the reverse-direction states depend on the
    whole truncated sequence, so nothing can be reused. The last entry is
    bit-identical to the full-sequence prediction."""
    if encoded.length == 0:
        raise ArgumentError("cannot build a risk curve for an empty sequence")
    return [
        forward(params, encoded.truncated(t)).y_hat
        for t in range(1, encoded.length + 1)
    ]


def top_contributors(
    scores: np.ndarray,
    vocab: CodeVocabulary,
    k: int,
    group_by_kind: bool = False,
    counts: np.ndarray | None = None,
) -> list[dict]:
    """Codes ranked by descending score, ties broken by ascending id.
    With group_by_kind, the top k within each kind. Masked or undefined
    scores are skipped. ``counts`` restricts the ranking to codes that
    occurred at all."""
    if k < 1:
        raise ArgumentError("k must be >= 1")
    mask = np.ma.getmaskarray(scores) if np.ma.isMaskedArray(scores) else np.zeros(len(scores), bool)
    vals = np.ma.getdata(scores)

    def eligible(c: int) -> bool:
        if mask[c]:
            return False
        return counts is None or counts[c] > 0

    def ranked(ids):
        ids = [c for c in ids if eligible(c)]
        ids.sort(key=lambda c: (-vals[c], c))
        return ids[:k]

    def entry(c):
        return {
            "code": int(c),
            "label": vocab.labels[c],
            "kind": vocab.kinds[c],
            "score": float(vals[c]),
        }

    if group_by_kind:
        out = []
        for kind in ("diagnosis", "treatment", "prescription"):
            out.extend(entry(c) for c in ranked(vocab.ids_of_kind(kind)))
        return out
    return [entry(c) for c in ranked(range(len(vocab)))]


def contributions_for_record(
    params: ModelParams, record: PatientRecord, vocab: CodeVocabulary
) -> tuple[ForwardTrace, ContributionMatrix]:
    """Convenience: encode, run forward, decompose."""
    from .data import encode_patient

    enc = encode_patient(record, vocab)
    trace = forward(params, enc)
    return trace, code_contributions(trace, params)
