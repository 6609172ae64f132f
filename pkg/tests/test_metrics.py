import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retainex.metrics import auc, average_precision, best_f1_threshold
from retainex.numerics import ArgumentError, make_rng


def brute_force_auc(scores, labels):
    """Count every positive-negative pair directly."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_ap(scores, labels):
    """Walk the ranking (descending score, ascending index on ties)."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            total += hits / rank
    return total / sum(labels)


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.9, 0.1], [1, 0]) == 1.0

    def test_all_ties_is_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_hand_counted_pairs(self):
        # pairs: (.8>.6)=1 (.8>.2)=1 (.4<.6)=0 (.4>.2)=1 -> 3/4
        assert auc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(ArgumentError):
            auc([0.1, 0.2], [1, 1])

    @given(st.integers(2, 200), st.integers(0, 10_000))
    @settings(max_examples=150, deadline=None)
    def test_matches_brute_force_exactly(self, n, seed):
        rng = make_rng(seed)
        scores = np.round(rng.random(n), 2)  # coarse grid forces ties
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0], labels[1] = 0, 1
        assert auc(scores, labels) == brute_force_auc(scores.tolist(), labels.tolist())

    def test_invariant_under_monotone_transform(self):
        rng = make_rng(3)
        scores = rng.random(60)
        labels = rng.integers(0, 2, size=60)
        labels[0], labels[1] = 0, 1
        base = auc(scores, labels)
        assert auc(2 * scores + 1, labels) == base
        assert auc(1 / (1 + np.exp(-scores)), labels) == base


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_single_positive_at_bottom(self):
        assert average_precision([0.9, 0.1], [0, 1]) == 0.5

    def test_alternating(self):
        got = average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert got == pytest.approx((1 / 1 + 2 / 3) / 2, abs=1e-9)

    def test_no_positives_rejected(self):
        with pytest.raises(ArgumentError):
            average_precision([0.5, 0.4], [0, 0])

    @given(st.integers(1, 200), st.integers(0, 10_000))
    @settings(max_examples=150, deadline=None)
    def test_matches_rank_walk_oracle(self, n, seed):
        rng = make_rng(seed)
        scores = np.round(rng.random(n), 2)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[0] = 1
        assert average_precision(scores, labels) == pytest.approx(
            brute_force_ap(scores.tolist(), labels.tolist()), abs=1e-12
        )


class TestBestF1:
    def test_perfectly_separated(self):
        t, f1 = best_f1_threshold([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert f1 == 1.0
        assert t == 0.8  # lowest candidate achieving the max

    def test_enumerated_example(self):
        t, f1 = best_f1_threshold([0.3, 0.2, 0.1], [1, 1, 0])
        assert (t, f1) == (0.2, 1.0)

    def test_single_class_rejected(self):
        with pytest.raises(ArgumentError):
            best_f1_threshold([0.5, 0.6], [1, 1])

    def test_exhaustive_scan_optimal(self):
        rng = make_rng(11)
        scores = rng.random(40)
        labels = rng.integers(0, 2, size=40)
        labels[0], labels[1] = 0, 1
        _, f1 = best_f1_threshold(scores, labels)
        for t in scores:
            pred = scores >= t
            tp = int(np.sum(pred & (labels == 1)))
            fp = int(np.sum(pred & (labels == 0)))
            fn = int(labels.sum()) - tp
            alt = 2 * tp / (2 * tp + fp + fn)
            assert f1 >= alt
