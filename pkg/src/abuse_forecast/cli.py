"""Command-line pipeline: synthesize, ingest, label, train, ablate, explain,
predict, serve.

Every command is deterministic given its inputs and seed.  Output tables are
byte-stable (floats via repr, LF line ends); each output file gets a sidecar
`<name>.manifest.json` recording the command, config digest, seeds, lexicon
digests, and input/output content digests, so artifacts chain back to their
sources.  Timestamps live only in the sidecar, never in the data files.

Exit codes: 0 ok, 2 usage/config, 3 data error, 4 internal.  Failures print
a one-line JSON error object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .balance import SmoteConfig, smote_matrix
from .corpus import Corpus, Label, load_corpus, read_corpus, save_corpus
from .ensembles import (
    ForestModel,
    HyperParams,
    MaxFeatures,
    manifest_digest,
    save_model,
)
from .errors import (
    AbuseForecastError,
    ConfigError,
    EmptyCorpusError,
    EmptyLexiconError,
    MissingVocabError,
    ParseError,
    SchemaError,
    StageMismatchError,
    UnlabeledError,
)
from .evaluate import (
    EvalConfig,
    ModelSpec,
    _fit_model,
    grid_to_rows,
    histogram_rows,
    reply_distribution,
    run_ablation,
)
from .explain import (
    ConversationClass,
    CorrelationTarget,
    correlation_matrix,
    importance_ranking,
    shap_attribute,
)
from .explain import top_words as rank_top_words
from .features import (
    FeatureMask,
    Stage,
    apply_scaler_matrix,
    assemble,
    feature_manifest,
    fit_bow,
    fit_scaler_matrix,
    to_matrix,
)
from .lexicons import built_in_registry, label_corpus, load_registry
from .serve import (
    load_snapshot,
    require_prepost,
    run_server,
    score_draft,
)
from .synth import SynthConfig, synth_corpus
from .textprep import preprocess

_MODEL_ALIASES = {
    "random_forest": "random_forest", "rf": "random_forest",
    "extra_trees": "extra_trees", "et": "extra_trees",
    "adaboost_r2": "adaboost_r2", "ada": "adaboost_r2",
    "adaboost": "adaboost_r2",
    "mean": "mean",
}

# Errors a caller can fix by changing arguments or config files.
_USAGE_ERRORS = (ParseError, SchemaError, ConfigError, EmptyLexiconError,
                 MissingVocabError, StageMismatchError, OSError, ValueError)


# ---------------------------------------------------------------------------
# sidecar manifests

def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(out_path: str | Path, command: str, config: dict,
                    seeds: dict, inputs: dict[str, str | Path],
                    outputs: dict[str, str | Path],
                    lexicon_digests: dict | None = None,
                    feature_manifest_digest: str = "") -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_digest": _config_digest(config),
        "seeds": seeds,
        "lexicon_digests": lexicon_digests or {},
        "feature_manifest_digest": feature_manifest_digest,
        "inputs": {name: {"path": str(p), "sha256": _sha256_file(p)}
                   for name, p in inputs.items()},
        "outputs": {name: {"path": str(p), "sha256": _sha256_file(p)}
                    for name, p in outputs.items()},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    sidecar = Path(str(out_path) + ".manifest.json")
    sidecar.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")


def _write_csv(path: str | Path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _require_labeled(corpus: Corpus, command: str) -> None:
    for c in corpus.conversations:
        for r in c.replies:
            if r.label is Label.UNLABELED:
                raise UnlabeledError(
                    f"{command} needs a labeled corpus; reply {r.id!r} in "
                    f"conversation {c.id!r} is unlabeled")


def _load_nonempty(path: str | Path, format: str = "jsonl") -> Corpus:
    corpus = load_corpus(path, format)
    if not corpus.conversations:
        raise EmptyCorpusError(f"{path} holds no conversations")
    return corpus


# ---------------------------------------------------------------------------
# commands

def cmd_ingest(args) -> dict:
    corpus, report = read_corpus(args.input, args.format)
    if not corpus.conversations:
        raise EmptyCorpusError(f"{args.input} holds no conversations")
    save_corpus(corpus, args.out)
    config = {"format": args.format}
    _write_manifest(args.out, "ingest", config, seeds={},
                    inputs={"input": args.input}, outputs={"corpus": args.out})
    return {
        "out": str(args.out),
        "n_conversations": report.n_conversations,
        "n_replies": report.n_replies,
        "dropped_deep_replies": report.dropped_deep_replies,
        "defaulted_fields": report.defaulted_fields,
        "warnings": list(report.warnings),
    }


def cmd_synth(args) -> dict:
    config = SynthConfig(
        n_conversations=args.n,
        abusive_conversation_rate=args.abusive_rate,
        signal_mt=args.signal_mt, signal_tw=args.signal_tw,
        signal_ac=args.signal_ac, noise_sd=args.noise_sd,
        neutral_reply_mean=args.neutral_reply_mean,
    )
    corpus = synth_corpus(config, args.seed)
    save_corpus(corpus, args.out)
    _write_manifest(args.out, "synth", dataclasses.asdict(config),
                    seeds={"seed": args.seed}, inputs={},
                    outputs={"corpus": args.out})
    n_replies = sum(len(c.replies) for c in corpus.conversations)
    return {"out": str(args.out), "n_conversations": args.n,
            "n_replies": n_replies, "seed": args.seed}


def cmd_label(args) -> dict:
    corpus = _load_nonempty(args.corpus)
    if args.lexicons is None:
        registry = built_in_registry()
    else:
        registry = load_registry(args.lexicons)
    labeled = label_corpus(corpus, registry, threshold=args.threshold)
    save_corpus(labeled, args.out)
    flag_rows = [["conversation_id", "reply_id"]]
    for c in labeled.conversations:
        for r in c.replies:
            if r.label is Label.FLAG_MANUAL:
                flag_rows.append([c.id, r.id])
    flags_path = args.flags or str(args.out) + ".flags.csv"
    _write_csv(flags_path, flag_rows)
    config = {"threshold": args.threshold,
              "lexicons": None if args.lexicons is None else str(args.lexicons)}
    _write_manifest(args.out, "label", config, seeds={},
                    inputs={"corpus": args.corpus},
                    outputs={"corpus": args.out, "flags": flags_path},
                    lexicon_digests={"registry": registry.digest()})
    return {"out": str(args.out), "flags": str(flags_path),
            "flagged": len(flag_rows) - 1,
            "abusive_replies": sum(c.y for c in labeled.conversations)}


def _resolve_model_kind(name: str) -> str:
    try:
        return _MODEL_ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown model name {name!r}; expected one of "
                          f"{sorted(set(_MODEL_ALIASES))}") from None


def _hyperparams(args, kind: str) -> HyperParams:
    from .evaluate import _DEFAULT_PARAMS

    base = _DEFAULT_PARAMS[kind]
    overrides: dict = {"seed": args.seed}
    if args.trees is not None:
        overrides["n_trees"] = args.trees
    if args.depth is not None:
        overrides["max_depth"] = args.depth
    if args.min_leaf is not None:
        overrides["min_samples_leaf"] = args.min_leaf
    if args.max_features is not None:
        overrides["max_features_rule"] = MaxFeatures(args.max_features)
    return dataclasses.replace(base, **overrides)


def cmd_train(args) -> dict:
    kind = _resolve_model_kind(args.model)
    if kind == "mean":
        raise ConfigError("the mean baseline is not a servable model")
    mask = FeatureMask.from_string(args.mask)
    stage = Stage(args.stage)
    corpus = _load_nonempty(args.corpus)
    _require_labeled(corpus, "train")
    registry = built_in_registry()

    # Same pipeline as one evaluation fold, fit on the whole corpus:
    # vocabulary -> assemble -> scale -> oversample -> fit.
    vocab = None
    if mask.te:
        streams = [preprocess(c.parent.text) for c in corpus.conversations]
        vocab = fit_bow(streams, cap=args.bow_cap)
    vectors = [assemble(c, mask, stage, vocab, registry)
               for c in corpus.conversations]
    X = to_matrix(vectors, vocab_size=len(vocab) if vocab else 0)
    y = np.array([c.y for c in corpus.conversations], dtype=float)
    scaler = fit_scaler_matrix(X)
    Xs = apply_scaler_matrix(X, scaler)
    if args.no_smote:
        X_fit, y_fit = Xs, y
    else:
        X_fit, y_fit = smote_matrix(Xs, y, y >= 1, SmoteConfig(seed=args.seed),
                                    dense_width=vectors[0].width)
    params = _hyperparams(args, kind)
    model = _fit_model(ModelSpec(kind, params=params), X_fit, y_fit)

    fm = feature_manifest(mask, stage, vocab)
    rng = np.random.default_rng(args.seed)
    picks = rng.choice(X_fit.shape[0],
                       size=min(args.background, X_fit.shape[0]),
                       replace=False)
    extras = {
        "mask": mask.to_string(),
        "stage": stage.value,
        "scaler": {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()},
        "background": X_fit[np.sort(picks)].tolist(),
        "y_range": [float(y_fit.min()), float(y_fit.max())],
        "training": {
            "corpus_sha256": _sha256_file(args.corpus),
            "n_conversations": len(corpus.conversations),
            "seed": args.seed,
            "smote": not args.no_smote,
            "bow_cap": args.bow_cap,
            "background_size": int(len(picks)),
        },
    }
    save_model(model, args.out, feature_manifest=fm, extras=extras)
    config = {"model": kind, "mask": mask.to_string(), "stage": stage.value,
              "params": {"n_trees": params.n_trees,
                         "max_depth": params.max_depth,
                         "min_samples_leaf": params.min_samples_leaf,
                         "max_features_rule": params.max_features_rule.value,
                         "bootstrap": params.bootstrap},
              "bow_cap": args.bow_cap, "smote": not args.no_smote,
              "background": args.background}
    _write_manifest(args.out, "train", config, seeds={"seed": args.seed},
                    inputs={"corpus": args.corpus},
                    outputs={"model": args.out},
                    lexicon_digests={"registry": registry.digest()},
                    feature_manifest_digest=manifest_digest(fm))
    return {"out": str(args.out), "model": kind, "mask": mask.to_string(),
            "stage": stage.value, "n_features": model.n_features,
            "model_sha256": _sha256_file(args.out)}


def cmd_ablate(args) -> dict:
    corpus = _load_nonempty(args.corpus)
    _require_labeled(corpus, "ablate")
    stage = Stage(args.stage)
    specs = []
    for name in args.models.split(","):
        kind = _resolve_model_kind(name.strip())
        spec_params = None if args.trees is None and args.depth is None \
            and args.min_leaf is None and args.max_features is None \
            else _hyperparams(args, kind)
        specs.append(ModelSpec(kind, params=spec_params))
    cfg = EvalConfig(k_folds=args.folds, seed=args.seed,
                     smote=None if args.no_smote else SmoteConfig(seed=args.seed),
                     bow_cap=args.bow_cap)
    grid = run_ablation(corpus, stage, specs, cfg)
    _write_csv(args.out, grid_to_rows(grid))
    config = {"stage": stage.value, "models": [s.column for s in specs],
              "k_folds": args.folds, "bow_cap": args.bow_cap,
              "smote": not args.no_smote}
    _write_manifest(args.out, "ablate", config, seeds={"seed": args.seed},
                    inputs={"corpus": args.corpus}, outputs={"grid": args.out})
    return {"out": str(args.out), "cells": len(grid.cells),
            "best_r2": grid.best_r2, "best_mse": grid.best_mse}


def cmd_explain(args) -> dict:
    snapshot = load_snapshot(args.model)
    if not isinstance(snapshot.model, ForestModel):
        raise ConfigError(
            "attributions need a forest model; boosted models aggregate by "
            "weighted median, which has no additive attribution")
    corpus = _load_nonempty(args.corpus)
    _require_labeled(corpus, "explain")
    registry = built_in_registry()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    vectors = [assemble(c, snapshot.mask, snapshot.stage, snapshot.vocab,
                        registry) for c in corpus.conversations]
    vocab_size = len(snapshot.vocab) if snapshot.vocab is not None else 0
    X = to_matrix(vectors, vocab_size=vocab_size)
    Xs = apply_scaler_matrix(X, snapshot.scaler)
    rng = np.random.default_rng(args.seed)
    picks = np.sort(rng.choice(Xs.shape[0],
                               size=min(args.samples, Xs.shape[0]),
                               replace=False))

    beeswarm = [["feature", "sample_index", "attribution", "feature_value"]]
    for row in picks:
        att = shap_attribute(snapshot.model, Xs[row], snapshot.background)
        for j, name in enumerate(snapshot.columns):
            beeswarm.append([name, str(int(row)), repr(float(att.values[j])),
                             repr(float(Xs[row, j]))])
    _write_csv(out_dir / "beeswarm.csv", beeswarm)

    ranking = importance_ranking(snapshot.model, Xs[picks],
                                 snapshot.background,
                                 columns=list(snapshot.columns))
    importance = [["rank", "feature", "mean_abs_attribution"]]
    for rank, (name, value) in enumerate(ranking.entries, start=1):
        importance.append([str(rank), name, repr(value)])
    _write_csv(out_dir / "importance.csv", importance)

    correlations = [["family", "feature", "abusive_reply_count",
                     "neutral_reply_count"]]
    for family in snapshot.mask.families():
        by_target = {
            target: correlation_matrix(corpus, family.value, target, registry,
                                       stage=snapshot.stage)
            for target in CorrelationTarget
        }
        for name in by_target[CorrelationTarget.ABUSIVE_REPLY_COUNT]:
            cells = [by_target[t][name] for t in CorrelationTarget]
            correlations.append(
                [family.value, name]
                + ["NA" if v is None else repr(v) for v in cells])
    _write_csv(out_dir / "correlations.csv", correlations)

    words = [["class", "rank", "word", "count"]]
    for cls in ConversationClass:
        for rank, (word, count) in enumerate(
                rank_top_words(corpus, cls, n=args.top_words), start=1):
            words.append([cls.value, str(rank), word, str(count)])
    _write_csv(out_dir / "top_words.csv", words)

    _write_csv(out_dir / "histogram.csv",
               histogram_rows(reply_distribution(corpus)))

    outputs = {name: out_dir / f"{name}.csv"
               for name in ("beeswarm", "importance", "correlations",
                            "top_words", "histogram")}
    config = {"samples": args.samples, "top_words": args.top_words,
              "mask": snapshot.mask.to_string(), "stage": snapshot.stage.value}
    _write_manifest(out_dir / "explain", "explain", config,
                    seeds={"seed": args.seed},
                    inputs={"model": args.model, "corpus": args.corpus},
                    outputs=outputs,
                    lexicon_digests={"registry": registry.digest()},
                    feature_manifest_digest=manifest_digest(
                        snapshot.feature_manifest))
    return {"out": str(out_dir),
            "files": sorted(str(p) for p in outputs.values()),
            "top_feature": ranking.entries[0][0]}


def cmd_predict(args) -> dict:
    snapshot = load_snapshot(args.model)
    require_prepost(snapshot)
    if args.draft == "-":
        raw = sys.stdin.read()
    else:
        raw = Path(args.draft).read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ParseError(f"draft is not valid JSON: {e}") from None
    response = score_draft(snapshot, payload)
    if args.out is not None:
        Path(args.out).write_text(
            json.dumps(response, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        _write_manifest(args.out, "predict",
                        {"model_id": snapshot.model_id}, seeds={},
                        inputs={"model": args.model},
                        outputs={"response": args.out},
                        feature_manifest_digest=manifest_digest(
                            snapshot.feature_manifest))
    return response


def cmd_serve(args) -> None:
    run_server(args.model, args.addr, args.static)


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so failures share the JSON error path."""

    def error(self, message):
        raise ConfigError(message)


def _add_hyperparam_flags(p) -> None:
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=None)
    p.add_argument("--max-features", choices=[m.value for m in MaxFeatures],
                   default=None)
    p.add_argument("--bow-cap", type=int, default=5000)
    p.add_argument("--no-smote", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abuse-forecast",
                     description="Forecast abusive reply volume for drafts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a raw corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a planted-signal corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--abusive-rate", type=float, default=0.2)
    p.add_argument("--signal-mt", type=float, default=1.0)
    p.add_argument("--signal-tw", type=float, default=1.0)
    p.add_argument("--signal-ac", type=float, default=0.0)
    p.add_argument("--noise-sd", type=float, default=0.5)
    p.add_argument("--neutral-reply-mean", type=float, default=2.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="label replies against the lexicons")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicons", default=None,
                   help="lexicon manifest JSON; default: built-in lists")
    p.add_argument("--threshold", default="0.1")
    p.add_argument("--flags", default=None,
                   help="manual-review list; default: <out>.flags.csv")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="fit a model and save a serving artifact")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mask", required=True, help="comma-joined families, e.g. mt,tw")
    p.add_argument("--stage", choices=[s.value for s in Stage], required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--background", type=int, default=100)
    _add_hyperparam_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="cross-validate every mask and model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--stage", choices=[s.value for s in Stage], required=True)
    p.add_argument("--models", default="random_forest,adaboost_r2,extra_trees")
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    _add_hyperparam_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("explain", help="emit attribution and analysis tables")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--top-words", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("predict", help="score one draft JSON file")
    p.add_argument("--model", required=True)
    p.add_argument("--draft", required=True, help="path or - for stdin")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the scoring HTTP service")
    p.add_argument("--model", default=None)
    p.add_argument("--addr", default=None)
    p.add_argument("--static", default=None,
                   help="directory with the built composer UI")
    p.set_defaults(func=cmd_serve)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    body = {"error": type(exc).__name__, "message": str(exc),
            "exit_code": code}
    print(json.dumps(body), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "serve":
            import os

            args.model = args.model or os.environ.get("ABUSE_FORECAST_MODEL")
            args.addr = args.addr or os.environ.get(
                "ABUSE_FORECAST_ADDR", "127.0.0.1:8000")
        payload = args.func(args)
    except _USAGE_ERRORS as e:
        return _fail(2, e)
    except AbuseForecastError as e:
        return _fail(3, e)
    except Exception as e:  # noqa: BLE001 - last-resort mapping to exit 4
        return _fail(4, e)
    if payload is not None:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
