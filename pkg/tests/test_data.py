import json

import numpy as np
import pytest

from retainex.data import (
    CodeVocabulary,
    DataError,
    Dataset,
    GeneratorConfig,
    ParseError,
    PatientRecord,
    VisitRecord,
    VocabularyConfig,
    build_vocabulary,
    encode_patient,
    generate_cohort,
    make_batches,
    read_dataset,
    read_vocabulary,
    split_dataset,
    write_dataset,
    write_vocabulary,
)
from retainex.numerics import ArgumentError


@pytest.fixture(scope="module")
def small_cohort():
    cfg = GeneratorConfig(n_case_groups=12, max_visits=40, seed=7)
    return generate_cohort(cfg)


class TestVocabulary:
    def test_default_sizes(self):
        vocab = build_vocabulary()
        assert len(vocab) == 1400
        assert vocab.kind_counts == {
            "diagnosis": 268,
            "treatment": 500,
            "prescription": 632,
        }

    def test_block_order_and_dense_ids(self):
        vocab = build_vocabulary(VocabularyConfig(2, 2, 2))
        assert len(vocab) == 6
        assert [e[0] for e in vocab.entries] == [0, 1, 2, 3, 4, 5]
        assert vocab.kinds == ["diagnosis"] * 2 + ["treatment"] * 2 + ["prescription"] * 2

    def test_zero_kind_count_rejected(self):
        with pytest.raises(ArgumentError):
            build_vocabulary(VocabularyConfig(0, 2, 2))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ArgumentError):
            build_vocabulary(
                VocabularyConfig(2, 1, 1, labels={"diagnosis": ["a", "a"]})
            )


class TestEncoding:
    def test_ones_at_active_codes(self):
        vocab = build_vocabulary(VocabularyConfig(4, 3, 3))
        rec = PatientRecord(
            "p0", 40, "F",
            (VisitRecord(0, (3, 7)),), 0, "g",
        )
        x = encode_patient(rec, vocab).dense()
        assert x.shape == (1, 10)
        assert x.sum() == 2
        assert x[0, 3] == 1 and x[0, 7] == 1

    def test_unknown_code_rejected_with_name(self):
        vocab = build_vocabulary(VocabularyConfig(4, 3, 3))
        rec = PatientRecord("p0", 40, "F", (VisitRecord(0, (99,)),), 0, "g")
        with pytest.raises(DataError, match="99"):
            encode_patient(rec, vocab)

    def test_duplicate_codes_collapse(self):
        v = VisitRecord(0, (2, 2, 2))
        assert v.codes == (2,)

    def test_decoding_recovers_code_sets(self):
        vocab = build_vocabulary(VocabularyConfig(5, 5, 5))
        visits = (VisitRecord(0, (1, 4)), VisitRecord(3, (2,)), VisitRecord(9, (0, 14)))
        rec = PatientRecord("p", 30, "M", visits, 1, "g")
        enc = encode_patient(rec, vocab)
        for t, v in enumerate(visits):
            recovered = tuple(np.flatnonzero(enc.dense()[t]))
            assert recovered == v.codes


class TestGenerator:
    def test_same_seed_same_bytes(self, tmp_path):
        cfg = GeneratorConfig(n_case_groups=5, seed=3)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(generate_cohort(cfg), p1)
        write_dataset(generate_cohort(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_group_sizes_and_prevalence(self):
        ds = generate_cohort(GeneratorConfig(n_case_groups=100, max_visits=30, seed=1))
        assert len(ds.patients) == 1100
        assert sum(p.label for p in ds.patients) == 100
        ds.validate_groups(controls_per_case=10)

    def test_minimum_visits(self, small_cohort):
        assert all(p.n_visits >= 5 for p in small_cohort.patients)

    def test_matching_within_groups(self, small_cohort):
        cfg = GeneratorConfig(**small_cohort.provenance)
        for gid, members in small_cohort.groups().items():
            case = next(p for p in members if p.label == 1)
            for p in members:
                assert p.gender == case.gender
                assert p.age // cfg.age_band_width == case.age // cfg.age_band_width
                assert abs(p.n_visits - case.n_visits) <= cfg.visit_band

    def test_nondecreasing_days_within_window(self, small_cohort):
        cfg = GeneratorConfig(**small_cohort.provenance)
        for p in small_cohort.patients:
            days = [v.day for v in p.visits]
            assert days == sorted(days)
            assert 0 <= days[0] and days[-1] < cfg.window_days

    def test_infeasible_config_rejected(self):
        with pytest.raises(ArgumentError):
            GeneratorConfig(n_case_groups=0)
        with pytest.raises(ArgumentError):
            GeneratorConfig(min_visits=3)
        with pytest.raises(ArgumentError):
            GeneratorConfig(mean_visits=4.0)


class TestSplit:
    def test_exact_group_counts(self):
        ds = generate_cohort(GeneratorConfig(n_case_groups=100, max_visits=25, seed=2))
        tr, va, te = split_dataset(ds, (0.65, 0.1, 0.25))
        assert (len(tr.groups()), len(va.groups()), len(te.groups())) == (65, 10, 25)

    def test_partition_is_exhaustive_and_disjoint(self):
        ds = generate_cohort(GeneratorConfig(n_case_groups=17, max_visits=25, seed=5))
        parts = split_dataset(ds, (0.5, 0.25, 0.25), seed=9)
        ids = [p.patient_id for part in parts for p in part.patients]
        assert sorted(ids) == sorted(p.patient_id for p in ds.patients)
        assert len(set(ids)) == len(ids)

    def test_groups_stay_together(self):
        ds = generate_cohort(GeneratorConfig(n_case_groups=10, max_visits=25, seed=6))
        for part in split_dataset(ds, (0.4, 0.3, 0.3), seed=1):
            part.validate_groups(controls_per_case=10)

    def test_bad_ratios_rejected(self):
        ds = Dataset(None, [])
        with pytest.raises(ArgumentError):
            split_dataset(ds, (0.5, 0.5, 0.5))
        with pytest.raises(ArgumentError):
            split_dataset(ds, (1.2, -0.1, -0.1))


class TestBatches:
    def test_one_batch_per_group(self, small_cohort):
        batches = make_batches(small_cohort, seed=0)
        assert len(batches) == 12

    def test_batch_label_multiset(self, small_cohort):
        for batch in make_batches(small_cohort, seed=0):
            labels = sorted(p.label for p in batch)
            assert labels == [0] * 10 + [1]
            assert batch[0].label == 1

    def test_same_seed_same_order(self, small_cohort):
        a = [b[0].patient_id for b in make_batches(small_cohort, seed=4)]
        b = [b[0].patient_id for b in make_batches(small_cohort, seed=4)]
        assert a == b

    def test_orphan_controls_rejected(self, small_cohort):
        broken = Dataset(
            small_cohort.vocabulary,
            [p for p in small_cohort.patients if p.label == 0],
        )
        with pytest.raises(DataError):
            make_batches(broken)


class TestPersistence:
    def test_round_trip(self, tmp_path, small_cohort):
        path = tmp_path / "ds.jsonl"
        write_dataset(small_cohort, path)
        back = read_dataset(path, vocabulary=small_cohort.vocabulary)
        assert back.patients == small_cohort.patients

    def test_truncated_line_names_line_number(self, tmp_path, small_cohort):
        path = tmp_path / "ds.jsonl"
        write_dataset(small_cohort, path)
        text = path.read_text().splitlines()
        text[2] = text[2][: len(text[2]) // 2]
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(ParseError) as exc:
            read_dataset(path)
        assert exc.value.line == 3

    def test_empty_file_is_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_dataset(path).patients == []

    def test_vocabulary_round_trip(self, tmp_path):
        vocab = build_vocabulary(VocabularyConfig(3, 4, 5))
        path = tmp_path / "vocab.json"
        write_vocabulary(vocab, path)
        assert read_vocabulary(path) == vocab

    def test_vocabulary_gap_rejected(self, tmp_path):
        path = tmp_path / "vocab.json"
        path.write_text(json.dumps([{"id": 1, "label": "x", "kind": "diagnosis"}]))
        with pytest.raises(ParseError):
            read_vocabulary(path)


class TestRecordValidation:
    def test_decreasing_days_rejected(self):
        with pytest.raises(DataError):
            PatientRecord(
                "p", 30, "F",
                (VisitRecord(5, (1,)), VisitRecord(2, (1,))), 0, "g",
            )

    def test_empty_visit_rejected(self):
        with pytest.raises(DataError):
            VisitRecord(0, ())

    def test_bad_gender_rejected(self):
        with pytest.raises(DataError):
            PatientRecord("p", 30, "X", (VisitRecord(0, (1,)),), 0, "g")
