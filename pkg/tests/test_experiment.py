import json

import pytest

from retainex.data import GeneratorConfig, VocabularyConfig, build_vocabulary, generate_cohort
from retainex.experiment import dataset_fingerprint, run_experiment
from retainex.numerics import ArgumentError


@pytest.fixture(scope="module")
def cohort():
    vocab = build_vocabulary(VocabularyConfig(8, 8, 8))
    return generate_cohort(
        GeneratorConfig(n_case_groups=12, max_visits=14, seed=4), vocab
    )


class TestRunExperiment:
    def test_single_variant_single_row(self, cohort):
        report = run_experiment(cohort, ["gru"], m=4, epochs=1, seed=0)
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.variant == "gru"
        assert 0.0 <= row.auc <= 1.0
        assert 0.0 <= row.ap <= 1.0

    def test_repeatable(self, cohort):
        a = run_experiment(cohort, ["retainex_no_time"], m=4, epochs=2, seed=1)
        b = run_experiment(cohort, ["retainex_no_time"], m=4, epochs=2, seed=1)
        assert a.rows[0].auc == b.rows[0].auc
        assert a.rows[0].ap == b.rows[0].ap
        assert a.dataset_fingerprint == b.dataset_fingerprint

    def test_four_variant_table(self, cohort):
        report = run_experiment(
            cohort, ["gru", "retain", "retainex_no_time", "retainex"],
            m=4, epochs=1, seed=0,
        )
        text = report.render_text()
        assert len(report.rows) == 4
        assert len(text.splitlines()) == 6  # header + rule + 4 rows
        for row in report.rows:
            assert row.variant in text

    def test_json_and_csv_render(self, cohort):
        report = run_experiment(cohort, ["gru"], m=4, epochs=1, seed=0)
        blob = json.dumps(report.to_json_dict())
        assert "dataset_fingerprint" in blob
        csv = report.to_csv()
        assert csv.startswith("variant,auc,ap,")
        assert csv.count("\n") == 2

    def test_empty_variant_list_rejected(self, cohort):
        with pytest.raises(ArgumentError):
            run_experiment(cohort, [])


class TestFingerprint:
    def test_sensitive_to_content(self, cohort):
        other = generate_cohort(
            GeneratorConfig(n_case_groups=12, max_visits=14, seed=5),
            build_vocabulary(VocabularyConfig(8, 8, 8)),
        )
        assert dataset_fingerprint(cohort) != dataset_fingerprint(other)
