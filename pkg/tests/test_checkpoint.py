import numpy as np
import pytest

from retainex.checkpoint import (
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from retainex.model import EpochStats, Hyperparams, init_model


@pytest.fixture(params=["retainex", "retainex_no_time", "retain", "gru"])
def model(request):
    hp = Hyperparams(m=5, variant=request.param, seed=13)
    return init_model(hp, n_codes=9)


class TestRoundTrip:
    def test_all_tensors_bitwise_equal(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path, vocab_fingerprint="fp")
        loaded, header = load_checkpoint(path)
        assert loaded.variant == model.variant
        for name in model.store.names():
            np.testing.assert_array_equal(loaded.store[name], model.store[name])

    def test_header_metadata(self, tmp_path):
        hp = Hyperparams(m=4, variant="retainex", seed=3, epochs=2)
        model = init_model(hp, n_codes=6)
        model.store.step_count = 17
        history = [EpochStats(0, 1.0, 0.6, 9.0), EpochStats(1, 0.8, 0.7, 9.1)]
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path, hyperparams=hp, vocab_fingerprint="abc", history=history)
        loaded, header = load_checkpoint(path, expect_fingerprint="abc")
        assert loaded.store.step_count == 17
        assert header["hyperparams"]["seed"] == 3
        assert [h["val_auc"] for h in header["history"]] == [0.6, 0.7]
        assert "seconds" not in header["history"][0]  # timings are not persisted

    def test_same_params_same_bytes(self, model, tmp_path):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(model, a, vocab_fingerprint="fp")
        save_checkpoint(model, b, vocab_fingerprint="fp")
        assert a.read_bytes() == b.read_bytes()


class TestRejections:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_tampered_version(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        raw = raw.replace(b'"format_version":1', b'"format_version":9', 1)
        path.write_bytes(raw)
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_fingerprint_mismatch(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path, vocab_fingerprint="right")
        with pytest.raises(CheckpointError, match="vocabulary"):
            load_checkpoint(path, expect_fingerprint="wrong")

    def test_truncation(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 100])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_size_arithmetic(self, tmp_path):
        # embeddings dominate: 2 * m * C doubles plus the GRU blocks
        m, C = 8, 40
        model = init_model(Hyperparams(m=m, variant="retainex", seed=0), n_codes=C)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        total_params = sum(model.store[n].size for n in model.store.names())
        assert path.stat().st_size > total_params * 8
        assert total_params > 2 * m * C
