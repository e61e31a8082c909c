"""Metrics, stratified cross-validation, and the 15-mask ablation grid.

Fold discipline: the bag-of-words vocabulary, the scaler, and the
minority oversampler are all fit inside each training fold; test folds
never touch fit state.  Every report embeds a manifest recording that
choice together with seeds and hyperparameters, and each fold carries a
digest of its training-side state (vocabulary, scaler, augmented
design matrix) so leakage audits can assert the training half of a run
is unaffected by test-fold tampering.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .balance import SmoteConfig, smote_matrix
from .corpus import Corpus, abuse_volume
from .ensembles import (
    HyperParams,
    MaxFeatures,
    fit_adaboost_r2,
    fit_extra_trees,
    fit_random_forest,
    predict_batch,
)
from .errors import (
    ConfigError,
    EmptyDataError,
    LengthMismatchError,
    TooSmallError,
    ZeroVarianceError,
)
from .features import (
    TABLE_MASKS,
    FeatureMask,
    Stage,
    ac_block,
    bow_vector,
    fit_bow,
    fit_scaler_matrix,
    apply_scaler_matrix,
    mt_block,
    te_dense_block,
    tw_block,
    _pp,
)
from .lexicons import LexiconRegistry, built_in_registry


# ---------------------------------------------------------------------------
# metrics

def _paired(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y, dtype=float)
    b = np.asarray(y_hat, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatchError(f"lengths differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise EmptyDataError("metrics need at least one pair")
    return a, b


def mse(y, y_hat) -> float:
    a, b = _paired(y, y_hat)
    return float(np.mean((a - b) ** 2))


def r_squared(y, y_hat) -> float:
    a, b = _paired(y, y_hat)
    if a.size < 2:
        raise EmptyDataError("r_squared needs at least two pairs")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("r_squared undefined for constant targets")
    return 1.0 - float(np.sum((a - b) ** 2)) / ss_tot


def mae(y, y_hat) -> float:
    a, b = _paired(y, y_hat)
    return float(np.mean(np.abs(a - b)))


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: dict[str, int]

    def split(self, ids: Sequence[str], fold: int) -> tuple[list[int], list[int]]:
        """Positional (train, test) index lists for one held-out fold."""
        train, test = [], []
        for pos, cid in enumerate(ids):
            (test if self.fold_of[cid] == fold else train).append(pos)
        return train, test


def stratified_kfold(corpus: Corpus, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Shuffle within each class (y >= 1 vs y = 0), deal round-robin."""
    if k < 2:
        raise ConfigError("k must be >= 2")
    if len(corpus.conversations) < k:
        raise TooSmallError(f"need at least {k} conversations")
    pos = [c.id for c in corpus.conversations if abuse_volume(c) >= 1]
    neg = [c.id for c in corpus.conversations if abuse_volume(c) == 0]
    if min(len(pos), len(neg)) < k:
        raise TooSmallError(f"each class needs at least {k} members "
                            f"(got {len(pos)} positive, {len(neg)} negative)")
    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    for ids in (pos, neg):
        order = rng.permutation(len(ids))
        for deal, idx in enumerate(order):
            fold_of[ids[idx]] = deal % k
    return FoldAssignment(k=k, fold_of=fold_of)


# ---------------------------------------------------------------------------
# model specs and reports

_FIT = {
    "random_forest": fit_random_forest,
    "extra_trees": fit_extra_trees,
    "adaboost_r2": fit_adaboost_r2,
}

_DEFAULT_PARAMS = {
    "random_forest": HyperParams(),
    "extra_trees": HyperParams(max_features_rule=MaxFeatures.ALL, bootstrap=False),
    "adaboost_r2": HyperParams(n_trees=50, max_depth=3,
                               max_features_rule=MaxFeatures.ALL, bootstrap=False),
    "mean": HyperParams(n_trees=1),
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: HyperParams | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in _DEFAULT_PARAMS:
            raise ConfigError(f"unknown model kind {self.kind!r}")

    @property
    def resolved_params(self) -> HyperParams:
        return self.params if self.params is not None else _DEFAULT_PARAMS[self.kind]

    @property
    def column(self) -> str:
        return self.name if self.name is not None else self.kind


@dataclass(frozen=True)
class MeanModel:
    """Baseline that always predicts its training mean."""
    value: float


def _fit_model(spec: ModelSpec, X: np.ndarray, y: np.ndarray):
    if spec.kind == "mean":
        return MeanModel(value=float(y.mean()))
    return _FIT[spec.kind](X, y, spec.resolved_params)


def _model_predict(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, MeanModel):
        return np.full(X.shape[0], model.value)
    return predict_batch(model, X)


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    mse: float
    r2: float | None  # None when the test fold has constant targets
    mae: float
    train_digest: str


@dataclass(frozen=True)
class MetricReport:
    mse: float
    r2: float | None
    mae: float
    per_fold: tuple[FoldMetrics, ...]
    manifest: dict = field(compare=False)


def _summarize(per_fold: list[FoldMetrics], manifest: dict) -> MetricReport:
    r2_vals = [f.r2 for f in per_fold if f.r2 is not None]
    return MetricReport(
        mse=float(np.mean([f.mse for f in per_fold])),
        r2=float(np.mean(r2_vals)) if r2_vals else None,
        mae=float(np.mean([f.mae for f in per_fold])),
        per_fold=tuple(per_fold),
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# shared per-corpus evaluation state

_NOTE = ("vocabulary, scaler, and oversampler are refit inside each training "
         "fold; test folds never touch fit state")


@dataclass(frozen=True)
class EvalConfig:
    k_folds: int = 5
    seed: int = 0
    smote: SmoteConfig | None = SmoteConfig()
    bow_cap: int = 5000

    def __post_init__(self) -> None:
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if self.bow_cap < 1:
            raise ConfigError("bow_cap must be >= 1")


class _FoldContext:
    """Family blocks and per-fold vocab/BoW shared across masks and models."""

    def __init__(self, corpus: Corpus, stage: Stage, cfg: EvalConfig,
                 registry: LexiconRegistry, stopwords=None, tagger=None,
                 folds: FoldAssignment | None = None):
        convs = corpus.conversations
        self.stage = stage
        self.cfg = cfg
        self.ids = [c.id for c in convs]
        self.y = np.array([abuse_volume(c) for c in convs], dtype=float)
        self.blocks = {
            "te": np.array([te_dense_block(c, stage, registry, stopwords, tagger)
                            for c in convs]),
            "mt": np.array([mt_block(c, stage, stopwords) for c in convs]),
            "tw": np.array([tw_block(c, stage, registry, stopwords) for c in convs]),
            "ac": np.array([ac_block(c) for c in convs]),
        }
        self.streams = [_pp(c.parent.text, stopwords) for c in convs]
        self.folds = folds if folds is not None else stratified_kfold(
            corpus, cfg.k_folds, cfg.seed)
        self.fold_data = []
        for f in range(self.folds.k):
            train, test = self.folds.split(self.ids, f)
            vocab = fit_bow([self.streams[i] for i in train], cap=cfg.bow_cap)
            bow = np.zeros((len(convs), len(vocab)))
            for i, ts in enumerate(self.streams):
                for col, count in bow_vector(ts, vocab).items():
                    bow[i, col] = count
            self.fold_data.append((np.array(train), np.array(test), vocab, bow))

    def _design(self, mask: FeatureMask, bow: np.ndarray) -> tuple[np.ndarray, int]:
        parts = [self.blocks[fam] for fam in ("te", "mt", "tw", "ac")
                 if getattr(mask, fam)]
        dense_width = sum(p.shape[1] for p in parts)
        if mask.te:
            parts.append(bow)
        return np.hstack(parts), dense_width

    def evaluate(self, mask: FeatureMask,
                 specs: Sequence[ModelSpec]) -> dict[str, MetricReport]:
        cfg = self.cfg
        fold_rows: dict[str, list[FoldMetrics]] = {s.column: [] for s in specs}
        for f, (train, test, vocab, bow) in enumerate(self.fold_data):
            X, dense_width = self._design(mask, bow)
            scaler = fit_scaler_matrix(X[train])
            Xs = apply_scaler_matrix(X, scaler)
            y_train = self.y[train]
            if cfg.smote is not None:
                X_fit, y_fit = smote_matrix(Xs[train], y_train, y_train >= 1,
                                            cfg.smote, dense_width=dense_width)
            else:
                X_fit, y_fit = Xs[train], y_train
            digest = hashlib.sha256()
            digest.update("\x1f".join(vocab.terms).encode("utf-8"))
            digest.update(scaler.mean.tobytes() + scaler.std.tobytes())
            digest.update(X_fit.tobytes() + y_fit.tobytes())
            train_digest = digest.hexdigest()
            y_test = self.y[test]
            for spec in specs:
                model = _fit_model(spec, X_fit, y_fit)
                preds = _model_predict(model, Xs[test])
                try:
                    r2 = r_squared(y_test, preds)
                except ZeroVarianceError:
                    r2 = None
                fold_rows[spec.column].append(FoldMetrics(
                    fold=f, mse=mse(y_test, preds), r2=r2,
                    mae=mae(y_test, preds), train_digest=train_digest))
        out = {}
        for spec in specs:
            manifest = {
                "mask": mask.to_string(),
                "stage": self.stage.value,
                "model": spec.column,
                "kind": spec.kind,
                "params": {
                    "n_trees": spec.resolved_params.n_trees,
                    "max_depth": spec.resolved_params.max_depth,
                    "min_samples_leaf": spec.resolved_params.min_samples_leaf,
                    "max_features_rule": spec.resolved_params.max_features_rule.value,
                    "bootstrap": spec.resolved_params.bootstrap,
                    "seed": spec.resolved_params.seed,
                },
                "k_folds": self.folds.k,
                "seed": cfg.seed,
                "bow_cap": cfg.bow_cap,
                "smote": None if cfg.smote is None else {
                    "k_neighbors": cfg.smote.k_neighbors,
                    "target_ratio": cfg.smote.target_ratio,
                    "seed": cfg.smote.seed,
                },
                "fold_discipline": _NOTE,
            }
            out[spec.column] = _summarize(fold_rows[spec.column], manifest)
        return out


def cross_validate(corpus: Corpus, mask: FeatureMask, stage: Stage,
                   model_spec: ModelSpec, cfg: EvalConfig,
                   folds: FoldAssignment | None = None,
                   registry: LexiconRegistry | None = None,
                   stopwords=None, tagger=None) -> MetricReport:
    registry = registry if registry is not None else built_in_registry()
    ctx = _FoldContext(corpus, stage, cfg, registry, stopwords, tagger, folds)
    return ctx.evaluate(mask, [model_spec])[model_spec.column]


# ---------------------------------------------------------------------------
# ablation grid

@dataclass(frozen=True)
class AblationGrid:
    stage: Stage
    masks: tuple[FeatureMask, ...]
    models: tuple[str, ...]
    cells: dict[tuple[str, str], MetricReport]  # (mask string, model column)
    best_r2: dict[str, str]  # model column -> mask string of its best cell
    best_mse: dict[str, str]
    manifest: dict


def run_ablation(corpus: Corpus, stage: Stage, models: Sequence[ModelSpec],
                 cfg: EvalConfig, registry: LexiconRegistry | None = None,
                 stopwords=None, tagger=None,
                 folds: FoldAssignment | None = None) -> AblationGrid:
    if not models:
        raise ConfigError("run_ablation needs at least one model spec")
    columns = [s.column for s in models]
    if len(set(columns)) != len(columns):
        raise ConfigError("model columns must be unique")
    registry = registry if registry is not None else built_in_registry()
    ctx = _FoldContext(corpus, stage, cfg, registry, stopwords, tagger, folds)
    cells: dict[tuple[str, str], MetricReport] = {}
    for mask in TABLE_MASKS:
        for column, report in ctx.evaluate(mask, models).items():
            cells[(mask.to_string(), column)] = report
    best_r2, best_mse = {}, {}
    for column in columns:
        scored = [(m.to_string(), cells[(m.to_string(), column)])
                  for m in TABLE_MASKS]
        with_r2 = [(s, rep.r2) for s, rep in scored if rep.r2 is not None]
        if with_r2:
            best_r2[column] = max(with_r2, key=lambda t: t[1])[0]
        best_mse[column] = min(scored, key=lambda t: t[1].mse)[0]
    manifest = {
        "stage": stage.value,
        "models": columns,
        "k_folds": cfg.k_folds,
        "seed": cfg.seed,
        "bow_cap": cfg.bow_cap,
        "n_conversations": len(corpus.conversations),
        "fold_discipline": _NOTE,
    }
    return AblationGrid(stage=stage, masks=TABLE_MASKS, models=tuple(columns),
                        cells=cells, best_r2=best_r2, best_mse=best_mse,
                        manifest=manifest)


def reply_distribution(corpus: Corpus) -> dict[int, int]:
    """Histogram of abuse volume: y value -> conversation count."""
    out: dict[int, int] = {}
    for c in corpus.conversations:
        out[c.y] = out.get(c.y, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# tabular output (byte-stable: floats via repr, undefined cells as NA)

def _fmt(value: float | None) -> str:
    return "NA" if value is None else repr(value)


def grid_to_rows(grid: AblationGrid) -> list[list[str]]:
    k = max(len(rep.per_fold) for rep in grid.cells.values())
    header = ["mask", "model", "mse", "r2", "mae", "best_r2", "best_mse"]
    for f in range(k):
        header += [f"fold{f}_mse", f"fold{f}_r2", f"fold{f}_mae"]
    rows = [header]
    for mask in grid.masks:
        ms = mask.to_string()
        for column in grid.models:
            rep = grid.cells[(ms, column)]
            row = [ms, column, _fmt(rep.mse), _fmt(rep.r2), _fmt(rep.mae),
                   "1" if grid.best_r2.get(column) == ms else "0",
                   "1" if grid.best_mse.get(column) == ms else "0"]
            for fm in rep.per_fold:
                row += [_fmt(fm.mse), _fmt(fm.r2), _fmt(fm.mae)]
            rows.append(row)
    return rows


def histogram_rows(hist: dict[int, int]) -> list[list[str]]:
    return [["y", "count"]] + [[str(y), str(n)] for y, n in sorted(hist.items())]
