"""Model persistence.

Container layout: the 8-byte magic ``RXWB\\x00CKP``, an 8-byte
little-endian header length, a UTF-8 JSON header, then the raw tensor
bytes. The header records the format version, variant, hyperparameters,
vocabulary fingerprint, the deterministic part of the training history,
and a tensor directory (name, shape, byte offset, byte length) in store
order. Tensor data is float64 little-endian, row-major; a round trip
reproduces every parameter bitwise.

Wall-clock epoch timings are deliberately not stored: the checkpoint is
byte-identical across reruns with the same seed, and timings live in the
separate history file the CLI writes.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .model import Hyperparams, ModelParams

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint", "FORMAT_VERSION"]

MAGIC = b"RXWB\x00CKP"
FORMAT_VERSION = 1
_LE = "<f8"


class CheckpointError(ValueError):
    """The file is not a readable checkpoint of the expected version."""


def save_checkpoint(
    params: ModelParams,
    path,
    hyperparams: Hyperparams | None = None,
    vocab_fingerprint: str = "",
    history: list | None = None,
) -> None:
    tensors = []
    offset = 0
    names = params.store.names()
    for name in names:
        arr = params.store[name]
        nbytes = arr.size * 8
        tensors.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": nbytes}
        )
        offset += nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "variant": params.variant,
        "m": params.m,
        "n_codes": params.n_codes,
        "beta_tanh": params.beta_tanh,
        "step_count": params.store.step_count,
        "vocab_fingerprint": vocab_fingerprint,
        "hyperparams": None
        if hyperparams is None
        else {
            "m": hyperparams.m,
            "learning_rate": hyperparams.learning_rate,
            "epochs": hyperparams.epochs,
            "seed": hyperparams.seed,
            "variant": hyperparams.variant,
            "beta_tanh": hyperparams.beta_tanh,
        },
        "history": [
            {"epoch": h.epoch, "train_loss": h.train_loss, "val_auc": h.val_auc}
            for h in (history or [])
        ],
        "tensors": tensors,
    }
    blob = json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for name in names:
            arr = params.store[name]
            data = np.ascontiguousarray(arr, dtype=np.float64)
            if sys.byteorder != "little":
                data = data.astype(_LE)
            fh.write(data.tobytes())


def load_checkpoint(path, expect_fingerprint: str | None = None):
    """Returns (ModelParams, header dict). Raises CheckpointError on a bad
    magic, version or fingerprint mismatch, or truncation."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    pos = len(MAGIC)
    if len(raw) < pos + 8:
        raise CheckpointError("checkpoint truncated in header length")
    header_len = int.from_bytes(raw[pos : pos + 8], "little")
    pos += 8
    if len(raw) < pos + header_len:
        raise CheckpointError("checkpoint truncated in header")
    try:
        header = json.loads(raw[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    pos += header_len
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('format_version')!r}"
        )
    if expect_fingerprint is not None and header.get("vocab_fingerprint") != expect_fingerprint:
        raise CheckpointError("checkpoint was trained against a different vocabulary")
    params = ModelParams(
        header["variant"], header["m"], header["n_codes"], header["beta_tanh"]
    )
    body = raw[pos:]
    for spec in header["tensors"]:
        name, shape = spec["name"], tuple(spec["shape"])
        start, nbytes = spec["offset"], spec["nbytes"]
        if start + nbytes > len(body):
            raise CheckpointError(f"checkpoint truncated in tensor {name!r}")
        arr = np.frombuffer(body[start : start + nbytes], dtype=_LE).reshape(shape)
        if name not in params.store:
            raise CheckpointError(f"unexpected tensor {name!r} for variant")
        if params.store[name].shape != shape:
            raise CheckpointError(f"tensor {name!r} has wrong shape {shape}")
        params.store[name][...] = arr
    params.store.step_count = int(header.get("step_count", 0))
    return params, header
