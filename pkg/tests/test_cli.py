import json

import pytest
from click.testing import CliRunner

from retainex.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, runner):
    """A generated dataset + vocabulary shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    ds = root / "cohort.jsonl"
    vocab = root / "vocab.json"
    res = runner.invoke(
        main,
        ["generate", "--groups", "6", "--max-visits", "12", "--seed", "7",
         "--out", str(ds), "--vocab-out", str(vocab)],
    )
    assert res.exit_code == 0, res.output
    return root, ds, vocab


class TestGenerate:
    def test_same_seed_identical_files(self, runner, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            res = runner.invoke(
                main,
                ["generate", "--groups", "4", "--max-visits", "10", "--seed", "7",
                 "--out", str(out)],
            )
            assert res.exit_code == 0, res.output
        assert a.read_bytes() == b.read_bytes()

    def test_config_file(self, runner, tmp_path):
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({"n_case_groups": 3, "max_visits": 10, "seed": 1}))
        res = runner.invoke(
            main, ["generate", "--config", str(cfg), "--out", str(tmp_path / "d.jsonl")]
        )
        assert res.exit_code == 0
        assert "33 patients" in res.output

    def test_unknown_config_key_exits_2(self, runner, tmp_path):
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({"bogus_setting": 1}))
        res = runner.invoke(
            main, ["generate", "--config", str(cfg), "--out", str(tmp_path / "d.jsonl")]
        )
        assert res.exit_code == 2

    def test_unknown_flag_exits_2(self, runner, tmp_path):
        res = runner.invoke(main, ["generate", "--nonsense", "1"])
        assert res.exit_code == 2
        assert "Usage" in res.output or "no such option" in res.output.lower()


class TestTrain:
    def test_checkpoint_byte_identical_across_runs(self, runner, workspace):
        root, ds, vocab = workspace
        outs = []
        for name in ("m1.ckpt", "m2.ckpt"):
            out = root / name
            res = runner.invoke(
                main,
                ["train", "--dataset", str(ds), "--vocab", str(vocab),
                 "--variant", "retainex", "--m", "3", "--epochs", "2",
                 "--seed", "5", "--ratios", "0.5,0.25,0.25", "--out", str(out)],
            )
            assert res.exit_code == 0, res.output
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_history_is_reproducible(self, runner, workspace):
        root, ds, vocab = workspace
        vals = []
        for name in ("h1.json", "h2.json"):
            hist = root / name
            res = runner.invoke(
                main,
                ["train", "--dataset", str(ds), "--vocab", str(vocab),
                 "--variant", "gru", "--m", "3", "--epochs", "2", "--seed", "9",
                 "--ratios", "0.5,0.25,0.25",
                 "--out", str(root / f"{name}.ckpt"), "--history-out", str(hist)],
            )
            assert res.exit_code == 0, res.output
            vals.append([h["val_auc"] for h in json.loads(hist.read_text())])
        assert vals[0] == vals[1]

    def test_bad_ratios_exit_2(self, runner, workspace):
        root, ds, vocab = workspace
        res = runner.invoke(
            main,
            ["train", "--dataset", str(ds), "--vocab", str(vocab),
             "--ratios", "0.5,0.5,0.5", "--out", str(root / "x.ckpt")],
        )
        assert res.exit_code == 2


class TestEvaluate:
    def test_four_row_table(self, runner, workspace):
        root, ds, vocab = workspace
        res = runner.invoke(
            main,
            ["evaluate", "--dataset", str(ds), "--vocab", str(vocab),
             "--variants", "gru,retain,retainex-no-time,retainex",
             "--m", "3", "--epochs", "1", "--seed", "0",
             "--json-out", str(root / "report.json")],
        )
        assert res.exit_code == 0, res.output
        table = [l for l in res.stdout.splitlines() if l and not l.startswith("-")]
        assert len(table) == 5  # header + 4 rows
        rows = json.loads((root / "report.json").read_text())["rows"]
        assert [r["variant"] for r in rows] == [
            "gru", "retain", "retainex_no_time", "retainex",
        ]

    def test_identical_metrics_across_runs(self, runner, workspace):
        # identical up to wall-clock timing, which is measurement not output
        root, ds, vocab = workspace
        rows = []
        for name in ("r1.json", "r2.json"):
            out = root / name
            args = ["evaluate", "--dataset", str(ds), "--vocab", str(vocab),
                    "--variants", "gru,retainex", "--m", "3", "--epochs", "1",
                    "--seed", "3", "--json-out", str(out)]
            res = runner.invoke(main, args)
            assert res.exit_code == 0, res.output
            data = json.loads(out.read_text())["rows"]
            rows.append([
                {k: v for k, v in r.items() if k != "seconds_per_epoch"} for r in data
            ])
        assert rows[0] == rows[1]

    def test_unknown_variant_exit_2(self, runner, workspace):
        root, ds, vocab = workspace
        res = runner.invoke(
            main,
            ["evaluate", "--dataset", str(ds), "--vocab", str(vocab),
             "--variants", "transformer"],
        )
        assert res.exit_code == 2


class TestServeConfig:
    def test_missing_keys_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "serve.json"
        cfg.write_text(json.dumps({"port": 8000}))
        res = runner.invoke(main, ["serve", "--config", str(cfg)])
        assert res.exit_code == 2

    def test_settings_parse(self, tmp_path):
        from retainex.server import ServeSettings

        cfg = tmp_path / "serve.json"
        cfg.write_text(json.dumps({
            "dataset": "x.jsonl", "checkpoint": "m.ckpt",
            "projection": {"method": "pca", "seed": 3},
            "projection_cap": 123,
        }))
        settings = ServeSettings.from_file(cfg)
        assert settings.projection.method == "pca"
        assert settings.projection.seed == 3
        assert settings.projection_cap == 123


class TestProject:
    def test_embedding_file_and_determinism(self, runner, workspace):
        root, ds, vocab = workspace
        ckpt = root / "proj.ckpt"
        res = runner.invoke(
            main,
            ["train", "--dataset", str(ds), "--vocab", str(vocab), "--m", "3",
             "--epochs", "1", "--seed", "2", "--ratios", "0.5,0.25,0.25",
             "--out", str(ckpt)],
        )
        assert res.exit_code == 0, res.output
        blobs = []
        for name in ("e1.json", "e2.json"):
            out = root / name
            res = runner.invoke(
                main,
                ["project", "--checkpoint", str(ckpt), "--dataset", str(ds),
                 "--vocab", str(vocab), "--method", "pca", "--seed", "0",
                 "--out", str(out)],
            )
            assert res.exit_code == 0, res.output
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
        payload = json.loads(blobs[0])
        assert len(payload["ids"]) == len(payload["points"]) == 66

    def test_cap_enforced(self, runner, workspace):
        root, ds, vocab = workspace
        ckpt = root / "proj.ckpt"
        res = runner.invoke(
            main,
            ["project", "--checkpoint", str(ckpt), "--dataset", str(ds),
             "--vocab", str(vocab), "--cap", "5", "--out", str(root / "e.json")],
        )
        assert res.exit_code == 2
