"""Command-line entry points: generate, train, evaluate, project, serve.

Every subcommand accepts --seed. Exit codes: 0 on success, 2 on a
validation problem (bad flags, bad config, malformed data), 1 on a
runtime failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    DataError,
    Dataset,
    GeneratorConfig,
    ParseError,
    build_vocabulary,
    generate_cohort,
    read_dataset,
    read_vocabulary,
    split_dataset,
    write_dataset,
    write_vocabulary,
)
from .experiment import run_experiment
from .model import Hyperparams, train
from .numerics import ArgumentError
from .projection import ProjectionConfig, project

_CLI_VARIANTS = {
    "retainex": "retainex",
    "retainex-no-time": "retainex_no_time",
    "retain": "retain",
    "gru": "gru",
}

_VALIDATION_ERRORS = (ArgumentError, DataError, ParseError, CheckpointError, ValueError)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    try:
        return fn()
    except _VALIDATION_ERRORS as exc:
        _fail(str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 1
        _fail(str(exc), 1)


@click.group()
def main():
    """Interpretable sequence risk prediction workbench."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of generator settings.")
@click.option("--groups", type=int, default=None, help="Number of case groups.")
@click.option("--max-visits", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True, help="Dataset JSONL path.")
@click.option("--vocab-out", type=click.Path(), default=None, help="Vocabulary JSON path.")
def generate(config_path, groups, max_visits, seed, out, vocab_out):
    """Generate a synthetic case/control cohort."""

    def run():
        fields = {}
        if config_path:
            with open(config_path) as fh:
                fields.update(json.load(fh))
        if groups is not None:
            fields["n_case_groups"] = groups
        if max_visits is not None:
            fields["max_visits"] = max_visits
        if seed is not None:
            fields["seed"] = seed
        known = {f.name for f in dataclasses.fields(GeneratorConfig)}
        unknown = set(fields) - known
        if unknown:
            raise ArgumentError(f"unknown generator settings: {sorted(unknown)}")
        cfg = GeneratorConfig(**fields)
        ds = generate_cohort(cfg)
        write_dataset(ds, out)
        if vocab_out:
            write_vocabulary(ds.vocabulary, vocab_out)
        click.echo(f"wrote {len(ds.patients)} patients to {out}")

    _guard(run)


@main.command(name="train")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--variant", type=click.Choice(sorted(_CLI_VARIANTS)), default="retainex")
@click.option("--m", type=int, default=64, help="Hidden/embedding size.")
@click.option("--lr", type=float, default=0.001)
@click.option("--epochs", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--ratios", default="0.65,0.1,0.25", help="train,val,test split ratios.")
@click.option("--out", type=click.Path(), required=True, help="Checkpoint path.")
@click.option("--history-out", type=click.Path(), default=None,
              help="Optional per-epoch history JSON (includes wall-clock timings).")
def train_cmd(dataset_path, vocab_path, variant, m, lr, epochs, seed, ratios, out, history_out):
    """Train one variant and write a checkpoint."""

    def run():
        vocab = read_vocabulary(vocab_path) if vocab_path else build_vocabulary()
        ds = read_dataset(dataset_path, vocabulary=vocab)
        parts = tuple(float(r) for r in ratios.split(","))
        if len(parts) != 3:
            raise ArgumentError("ratios must be three comma-separated numbers")
        train_ds, val_ds, _ = split_dataset(ds, parts, seed=seed)
        hp = Hyperparams(
            m=m, learning_rate=lr, epochs=epochs, seed=seed,
            variant=_CLI_VARIANTS[variant],
        )
        params, history = train(
            train_ds, val_ds, hp,
            log=lambda s: click.echo(
                f"epoch {s.epoch}: loss {s.train_loss:.4f} "
                f"val_auc {s.val_auc:.4f} ({s.seconds:.1f}s)", err=True,
            ),
        )
        save_checkpoint(
            params, out, hyperparams=hp,
            vocab_fingerprint=vocab.fingerprint(), history=history,
        )
        if history_out:
            with open(history_out, "w") as fh:
                json.dump([h.to_dict() for h in history], fh, indent=2)
        best = max(history, key=lambda h: h.val_auc)
        click.echo(f"wrote {out} (best epoch {best.epoch}, val AUC {best.val_auc:.4f})")

    _guard(run)


@main.command()
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--variants", default="gru,retain,retainex-no-time,retainex",
              help="Comma-separated variants to compare.")
@click.option("--m", type=int, default=64)
@click.option("--lr", type=float, default=0.001)
@click.option("--epochs", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--json-out", type=click.Path(), default=None)
@click.option("--csv-out", type=click.Path(), default=None)
def evaluate(dataset_path, vocab_path, variants, m, lr, epochs, seed, json_out, csv_out):
    """Train and compare variants on one dataset; print a results table."""

    def run():
        vocab = read_vocabulary(vocab_path) if vocab_path else build_vocabulary()
        ds = read_dataset(dataset_path, vocabulary=vocab)
        names = []
        for v in variants.split(","):
            v = v.strip()
            if v not in _CLI_VARIANTS:
                raise ArgumentError(f"unknown variant {v!r}")
            names.append(_CLI_VARIANTS[v])
        report = run_experiment(
            ds, names, m=m, learning_rate=lr, epochs=epochs, seed=seed,
            log=lambda msg: click.echo(msg, err=True),
        )
        click.echo(report.render_text())
        if json_out:
            with open(json_out, "w") as fh:
                json.dump(report.to_json_dict(), fh, indent=2)
        if csv_out:
            with open(csv_out, "w") as fh:
                fh.write(report.to_csv())

    _guard(run)


@main.command(name="project")
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--method", type=click.Choice(["pca", "tsne"]), default="tsne")
@click.option("--perplexity", type=float, default=30.0)
@click.option("--iterations", type=int, default=1000)
@click.option("--seed", type=int, default=0)
@click.option("--cap", type=int, default=5000, help="Maximum cohort size to embed.")
@click.option("--out", type=click.Path(), required=True)
def project_cmd(ckpt_path, dataset_path, vocab_path, method, perplexity, iterations, seed, cap, out):
    """Embed per-patient contribution vectors in 2-D."""

    def run():
        import numpy as np

        from .data import encode_patient
        from .interpret import code_contributions, patient_embedding
        from .model import forward

        vocab = read_vocabulary(vocab_path) if vocab_path else build_vocabulary()
        ds = read_dataset(dataset_path, vocabulary=vocab)
        if len(ds.patients) > cap:
            raise ArgumentError(
                f"projection capped at {cap} patients, dataset has {len(ds.patients)}"
            )
        params, _ = load_checkpoint(ckpt_path, expect_fingerprint=vocab.fingerprint())
        rows = []
        for rec in ds.patients:
            trace = forward(params, encode_patient(rec, vocab))
            emb = patient_embedding(code_contributions(trace, params), len(vocab))
            rows.append(emb.S)
        cfg = ProjectionConfig(
            method=method, perplexity=perplexity, iterations=iterations, seed=seed
        )
        emb2d = project(np.stack(rows), cfg)
        payload = {
            "method": emb2d.method,
            "ids": [p.patient_id for p in ds.patients],
            "points": emb2d.to_list(),
        }
        with open(out, "w") as fh:
            json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
        click.echo(f"wrote {out}")

    _guard(run)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="JSON: dataset, vocabulary, checkpoint, host, port, projection settings.")
@click.option("--seed", type=int, default=None, help="Override projection seed.")
def serve(config_path, seed):
    """Run the workbench HTTP service."""

    def run():
        import uvicorn

        from .projection import ProjectionConfig
        from .server import ServeSettings, create_app

        with open(config_path) as fh:
            cfg = json.load(fh)
        for key in ("dataset", "checkpoint"):
            if key not in cfg:
                raise ArgumentError(f"serve config is missing {key!r}")
        vocab = (
            read_vocabulary(cfg["vocabulary"]) if cfg.get("vocabulary") else build_vocabulary()
        )
        ds = read_dataset(cfg["dataset"], vocabulary=vocab)
        params, _ = load_checkpoint(cfg["checkpoint"], expect_fingerprint=vocab.fingerprint())
        settings = ServeSettings.from_file(config_path)
        if seed is not None:
            p = settings.projection
            settings.projection = ProjectionConfig(
                method=p.method, perplexity=p.perplexity, iterations=p.iterations, seed=seed
            )
        app = create_app(ds, params, settings)
        uvicorn.run(app, host=cfg.get("host", "127.0.0.1"), port=int(cfg.get("port", 8000)))

    _guard(run)


if __name__ == "__main__":
    main()
