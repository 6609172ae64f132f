"""Variant-comparison harness: train every requested variant on the same
split and seed, evaluate ranking metrics on the held-out test patients,
and render the results as JSON, an aligned text table, or CSV.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .data import Dataset, encode_patient, split_dataset, _patient_to_json
from .metrics import auc, average_precision
from .model import Hyperparams, ModelParams, predict, train
from .numerics import ArgumentError

__all__ = ["VariantResult", "EvalReport", "run_experiment", "dataset_fingerprint", "evaluate_model"]


def dataset_fingerprint(ds: Dataset) -> str:
    h = hashlib.sha256()
    for p in ds.patients:
        h.update(_patient_to_json(p).encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class VariantResult:
    variant: str
    auc: float
    ap: float
    seconds_per_epoch: float
    best_epoch: int

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "auc": self.auc,
            "ap": self.ap,
            "seconds_per_epoch": self.seconds_per_epoch,
            "best_epoch": self.best_epoch,
        }


@dataclass
class EvalReport:
    rows: list[VariantResult]
    dataset_fingerprint: str
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dataset_fingerprint": self.dataset_fingerprint,
            "rows": [r.to_dict() for r in self.rows],
        }

    def render_text(self) -> str:
        header = f"{'model':<18} {'AUC':>8} {'AP':>8} {'s/epoch':>9} {'best':>5}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.variant:<18} {r.auc:>8.4f} {r.ap:>8.4f} "
                f"{r.seconds_per_epoch:>9.2f} {r.best_epoch:>5d}"
            )
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["variant,auc,ap,seconds_per_epoch,best_epoch"]
        for r in self.rows:
            lines.append(
                f"{r.variant},{r.auc!r},{r.ap!r},{r.seconds_per_epoch!r},{r.best_epoch}"
            )
        return "\n".join(lines) + "\n"


def evaluate_model(params: ModelParams, ds: Dataset) -> tuple[float, float]:
    """Patient-level AUC and AP on a dataset."""
    vocab = ds.vocabulary
    if vocab is None:
        raise ArgumentError("dataset carries no vocabulary")
    scores = [predict(params, encode_patient(p, vocab)) for p in ds.patients]
    labels = [p.label for p in ds.patients]
    return auc(scores, labels), average_precision(scores, labels)


def run_experiment(
    ds: Dataset,
    variants: list[str],
    m: int = 64,
    learning_rate: float = 0.001,
    epochs: int = 10,
    seed: int = 0,
    ratios: tuple[float, float, float] = (0.65, 0.1, 0.25),
    log=None,
) -> EvalReport:
    """Identical data, split, and seed for every variant; one result row
    per variant."""
    if not variants:
        raise ArgumentError("need at least one variant")
    train_ds, val_ds, test_ds = split_dataset(ds, ratios, seed=seed)
    rows = []
    for variant in variants:
        hp = Hyperparams(
            m=m, learning_rate=learning_rate, epochs=epochs, seed=seed, variant=variant
        )
        if log:
            log(f"training {variant} (m={m}, lr={learning_rate}, epochs={epochs})")
        params, history = train(train_ds, val_ds, hp, log=log and (lambda s: log(
            f"  epoch {s.epoch}: loss {s.train_loss:.4f} val_auc {s.val_auc:.4f} ({s.seconds:.1f}s)"
        )))
        test_auc, test_ap = evaluate_model(params, test_ds)
        best = max(history, key=lambda h: h.val_auc).epoch
        rows.append(
            VariantResult(
                variant=variant,
                auc=test_auc,
                ap=test_ap,
                seconds_per_epoch=sum(h.seconds for h in history) / len(history),
                best_epoch=best,
            )
        )
    return EvalReport(
        rows=rows, dataset_fingerprint=dataset_fingerprint(ds), seed=seed
    )
