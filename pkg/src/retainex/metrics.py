"""Ranking metrics over per-patient scores: AUC (rank form with tie
credit), average precision, and best-F1 threshold selection.

Tie handling is pinned down so reports are bitwise reproducible: AUC
counts tied positive/negative pairs as half, AP sorts by descending score
breaking ties by ascending original index, and the F1 scan returns the
lowest maximizing threshold.
"""

from __future__ import annotations

import numpy as np

from .numerics import ArgumentError

__all__ = ["auc", "average_precision", "best_f1_threshold"]


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ArgumentError("scores and labels must be matching non-empty vectors")
    if not set(np.unique(y)) <= {0, 1}:
        raise ArgumentError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counting half:
    (concordant + 0.5 * tied) / (P * N), computed from midranks."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ArgumentError("auc needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Mean of precision@k over the ranks k of the positives, with scores
    in descending order and ties broken by ascending original index."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ArgumentError("average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


def best_f1_threshold(scores, labels) -> tuple[float, float]:
    """Scan every distinct score as a candidate threshold (predict positive
    when score >= threshold); return (threshold, f1) for the maximizer,
    preferring the lowest threshold on ties."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise ArgumentError("best_f1_threshold needs both classes")
    best_t = 0.0
    best_f1 = -1.0
    for t in sorted(set(s.tolist())):
        pred = s >= t
        tp = int(np.sum(pred & (y == 1)))
        fp = int(np.sum(pred & (y == 0)))
        fn = n_pos - tp
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    return best_t, best_f1
