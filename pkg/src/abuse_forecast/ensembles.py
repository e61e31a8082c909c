"""Regression trees and the three ensembles built on them.

Everything here is written against plain numpy arrays.  A tree is grown
greedily on weighted squared-error reduction; the split search is
vectorised across all candidate features at once so wide bag-of-words
blocks stay affordable.

Split rules:
  * midpoint mode (random forest): candidate thresholds are midpoints
    of consecutive distinct sorted values of each candidate feature;
  * random mode (extra trees): one uniform-random threshold per
    candidate feature between its node-local min and max.
Ties on gain break toward the lowest feature index, then the lowest
threshold, so refits are bit-identical.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataError,
    ManifestMismatchError,
    SchemaError,
    WidthMismatchError,
)

FORMAT_VERSION = 1


class MaxFeatures(str, Enum):
    ALL = "all"
    THIRD = "third"
    SQRT = "sqrt"

    def count(self, n_features: int) -> int:
        if self is MaxFeatures.ALL:
            return n_features
        if self is MaxFeatures.THIRD:
            return max(1, n_features // 3)
        return max(1, int(math.isqrt(n_features)))


@dataclass(frozen=True)
class HyperParams:
    n_trees: int = 300
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features_rule: MaxFeatures = MaxFeatures.THIRD
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class Leaf:
    value: float
    n: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Leaf | Split


@dataclass(frozen=True)
class ForestModel:
    kind: str  # "random_forest" | "extra_trees"
    trees: tuple[TreeNode, ...]
    params: HyperParams
    n_features: int
    feature_manifest_hash: str = ""


@dataclass(frozen=True)
class AdaBoostModel:
    kind: str = field(default="adaboost_r2", init=False)
    estimators: tuple[TreeNode, ...] = ()
    betas: tuple[float, ...] = ()
    params: HyperParams = HyperParams()
    n_features: int = 0
    feature_manifest_hash: str = ""


Model = ForestModel | AdaBoostModel


# ---------------------------------------------------------------------------
# growing a tree

def _best_split_midpoint(Xn: np.ndarray, yn: np.ndarray, wn: np.ndarray,
                         min_leaf: int) -> tuple[int, float, float] | None:
    """Best (local feature idx, threshold, gain) over all columns of Xn.

    Gain is sum-of-squares improvement: Sl^2/Wl + Sr^2/Wr - St^2/Wt,
    identical ordering to weighted-MSE reduction.
    """
    m = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    ws = wn[order]
    wy = ws * ys
    W = np.cumsum(ws, axis=0)
    S = np.cumsum(wy, axis=0)
    Wt = W[-1]
    St = S[-1]
    Wl, Sl = W[:-1], S[:-1]
    Wr, Sr = Wt - Wl, St - Sl
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = Sl * Sl / Wl + Sr * Sr / Wr - St * St / Wt
    counts = np.arange(1, m)[:, None]
    valid = (xs[1:] != xs[:-1]) & (counts >= min_leaf) & ((m - counts) >= min_leaf)
    gain = np.where(valid & np.isfinite(gain), gain, -np.inf)
    pos = gain.argmax(axis=0)  # first max per column = lowest threshold
    cols = np.arange(Xn.shape[1])
    col_gain = gain[pos, cols]
    best_col = int(col_gain.argmax())  # first max = lowest feature index
    if not np.isfinite(col_gain[best_col]) or col_gain[best_col] <= 0.0:
        return None
    p = int(pos[best_col])
    thr = float((xs[p, best_col] + xs[p + 1, best_col]) / 2.0)
    return best_col, thr, float(col_gain[best_col])


def _best_split_random(Xn: np.ndarray, yn: np.ndarray, wn: np.ndarray,
                       min_leaf: int, rng: np.random.Generator
                       ) -> tuple[int, float, float] | None:
    m = Xn.shape[0]
    mins = Xn.min(axis=0)
    maxs = Xn.max(axis=0)
    thr = rng.uniform(mins, maxs)
    left = Xn <= thr
    nl = left.sum(axis=0)
    usable = (maxs > mins) & (nl >= min_leaf) & ((m - nl) >= min_leaf)
    if not usable.any():
        return None
    Wl = wn @ left
    Sl = (wn * yn) @ left
    Wt = wn.sum()
    St = float(wn @ yn)
    Wr, Sr = Wt - Wl, St - Sl
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = Sl * Sl / Wl + Sr * Sr / Wr - St * St / Wt
    gain = np.where(usable & np.isfinite(gain), gain, -np.inf)
    best_col = int(gain.argmax())
    if not np.isfinite(gain[best_col]) or gain[best_col] <= 0.0:
        return None
    return best_col, float(thr[best_col]), float(gain[best_col])


def fit_tree(X: np.ndarray, y: np.ndarray, params: HyperParams,
             rng: np.random.Generator, row_weights: np.ndarray | None = None,
             random_thresholds: bool = False) -> TreeNode:
    """Grow one greedy regression tree.

    The per-node feature subset is drawn from rng (sorted ascending so
    the tie rule sees features in index order); nodes stop at
    max_depth, min_samples_leaf, or zero target variance.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("fit_tree needs at least one row")
    if X.shape[0] != y.shape[0]:
        raise WidthMismatchError("X and y row counts differ")
    w = np.ones(len(y)) if row_weights is None else np.asarray(row_weights, dtype=float)
    n_features = X.shape[1]
    k = params.max_features_rule.count(n_features)
    min_leaf = params.min_samples_leaf
    max_depth = params.max_depth

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        yn = y[rows]
        wn = w[rows]
        total_w = wn.sum()
        value = float((wn @ yn) / total_w) if total_w > 0 else float(yn.mean())
        leaf = Leaf(value=value, n=int(len(rows)))
        if (
            len(rows) < 2 * min_leaf
            or (max_depth is not None and depth >= max_depth)
            or np.all(yn == yn[0])
        ):
            return leaf
        if k < n_features:
            feats = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            feats = np.arange(n_features)
        Xn = X[np.ix_(rows, feats)]
        if random_thresholds:
            found = _best_split_random(Xn, yn, wn, min_leaf, rng)
        else:
            found = _best_split_midpoint(Xn, yn, wn, min_leaf)
        if found is None:
            return leaf
        local_f, thr, _ = found
        f = int(feats[local_f])
        go_left = X[rows, f] <= thr
        return Split(
            feature=f,
            threshold=thr,
            left=grow(rows[go_left], depth + 1),
            right=grow(rows[~go_left], depth + 1),
        )

    return grow(np.arange(X.shape[0]), 0)


# ---------------------------------------------------------------------------
# prediction

def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        cur, rows = stack.pop()
        if isinstance(cur, Leaf):
            out[rows] = cur.value
            continue
        go_left = X[rows, cur.feature] <= cur.threshold
        stack.append((cur.left, rows[go_left]))
        stack.append((cur.right, rows[~go_left]))
    return out


def _check_width(model: Model, X: np.ndarray) -> None:
    if X.shape[1] != model.n_features:
        raise WidthMismatchError(
            f"input width {X.shape[1]} != model width {model.n_features}")


def predict_batch(model: Model, X: np.ndarray,
                  manifest_hash: str | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_width(model, X)
    if manifest_hash is not None and model.feature_manifest_hash \
            and manifest_hash != model.feature_manifest_hash:
        raise ManifestMismatchError("feature manifest digest does not match model")
    if isinstance(model, ForestModel):
        preds = np.stack([tree_predict(t, X) for t in model.trees])
        return preds.mean(axis=0)
    preds = np.stack([tree_predict(t, X) for t in model.estimators])
    weights = np.log(1.0 / np.asarray(model.betas))
    order = np.argsort(preds, axis=0, kind="stable")
    wsorted = weights[order]
    cdf = np.cumsum(wsorted, axis=0)
    above = cdf >= 0.5 * cdf[-1]
    first = above.argmax(axis=0)
    cols = np.arange(X.shape[0])
    chosen = order[first, cols]
    return preds[chosen, cols]


def predict(model: Model, x: np.ndarray, manifest_hash: str | None = None) -> float:
    return float(predict_batch(model, np.asarray(x, dtype=float)[None, :],
                               manifest_hash)[0])


# ---------------------------------------------------------------------------
# ensembles

def _tree_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _require_rows(X: np.ndarray, minimum: int, who: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < minimum:
        raise EmptyDataError(f"{who} needs at least {minimum} rows")
    return X


def fit_random_forest(X: np.ndarray, y: np.ndarray, params: HyperParams,
                      manifest_hash: str = "") -> ForestModel:
    X = _require_rows(X, 2, "fit_random_forest")
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    trees = []
    for rng in _tree_rngs(params.seed, params.n_trees):
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            trees.append(fit_tree(X[rows], y[rows], params, rng))
        else:
            trees.append(fit_tree(X, y, params, rng))
    return ForestModel(kind="random_forest", trees=tuple(trees), params=params,
                       n_features=X.shape[1], feature_manifest_hash=manifest_hash)


def fit_extra_trees(X: np.ndarray, y: np.ndarray, params: HyperParams,
                    manifest_hash: str = "") -> ForestModel:
    """No bootstrap; every tree sees the full sample with random cuts."""
    X = _require_rows(X, 2, "fit_extra_trees")
    y = np.asarray(y, dtype=float)
    trees = [
        fit_tree(X, y, params, rng, random_thresholds=True)
        for rng in _tree_rngs(params.seed, params.n_trees)
    ]
    return ForestModel(kind="extra_trees", trees=tuple(trees), params=params,
                       n_features=X.shape[1], feature_manifest_hash=manifest_hash)


# beta recorded for a perfect (zero-loss) estimator: exp(-1), so its
# median weight ln(1/beta) is exactly 1
_PERFECT_BETA = math.exp(-1.0)
# beta recorded when the very first estimator is too weak to boost on
# (average loss >= 0.5) but must be kept to return a model at all
_WEAK_BETA = 1.0 - 1e-12


def fit_adaboost_r2(X: np.ndarray, y: np.ndarray, params: HyperParams,
                    manifest_hash: str = "") -> AdaBoostModel:
    """AdaBoost.R2 with linear loss.

    Each round fits a depth-limited tree on a weight-proportional
    resample, scores it on the full set, and reweights.  Boosting stops
    when the weighted average loss reaches 0.5 (the round is discarded
    unless it is the first) or hits zero (the round is kept and the
    model truncates there).
    """
    X = _require_rows(X, 2, "fit_adaboost_r2")
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    rng = np.random.default_rng(params.seed)
    weights = np.full(n, 1.0 / n)
    estimators: list[TreeNode] = []
    betas: list[float] = []
    for _ in range(params.n_trees):
        rows = rng.choice(n, size=n, replace=True, p=weights)
        tree = fit_tree(X[rows], y[rows], params, rng)
        err = np.abs(tree_predict(tree, X) - y)
        denom = err.max()
        if denom <= 0.0:
            estimators.append(tree)
            betas.append(_PERFECT_BETA)
            break
        loss = err / denom
        avg_loss = float(weights @ loss)
        if avg_loss >= 0.5:
            if not estimators:
                estimators.append(tree)
                betas.append(_WEAK_BETA)
            break
        beta = avg_loss / (1.0 - avg_loss)
        estimators.append(tree)
        betas.append(beta)
        weights = weights * np.power(beta, 1.0 - loss)
        weights = weights / weights.sum()
    return AdaBoostModel(estimators=tuple(estimators), betas=tuple(betas),
                         params=params, n_features=X.shape[1],
                         feature_manifest_hash=manifest_hash)


# ---------------------------------------------------------------------------
# serialization

def _node_to_obj(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value, "n": node.n}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj: dict) -> TreeNode:
    if "value" in obj:
        return Leaf(value=float(obj["value"]), n=int(obj["n"]))
    return Split(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_node_from_obj(obj["left"]),
        right=_node_from_obj(obj["right"]),
    )


def _params_to_obj(p: HyperParams) -> dict:
    return {
        "n_trees": p.n_trees,
        "max_depth": p.max_depth,
        "min_samples_leaf": p.min_samples_leaf,
        "max_features_rule": p.max_features_rule.value,
        "bootstrap": p.bootstrap,
        "seed": p.seed,
    }


def _params_from_obj(obj: dict) -> HyperParams:
    return HyperParams(
        n_trees=int(obj["n_trees"]),
        max_depth=None if obj.get("max_depth") is None else int(obj["max_depth"]),
        min_samples_leaf=int(obj["min_samples_leaf"]),
        max_features_rule=MaxFeatures(obj["max_features_rule"]),
        bootstrap=bool(obj["bootstrap"]),
        seed=int(obj["seed"]),
    )


def manifest_digest(feature_manifest: dict) -> str:
    canonical = json.dumps(feature_manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def model_to_artifact(model: Model, feature_manifest: dict | None = None,
                      extras: dict | None = None) -> dict:
    artifact: dict = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "params": _params_to_obj(model.params),
        "n_features": model.n_features,
        "feature_manifest": feature_manifest or {},
        "manifest_digest": model.feature_manifest_hash or (
            manifest_digest(feature_manifest) if feature_manifest else ""),
    }
    if isinstance(model, ForestModel):
        artifact["trees"] = [_node_to_obj(t) for t in model.trees]
    else:
        artifact["trees"] = [_node_to_obj(t) for t in model.estimators]
        artifact["betas"] = list(model.betas)
    if extras:
        artifact.update(extras)
    return artifact


def model_from_artifact(artifact: dict) -> Model:
    if artifact.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported artifact version {artifact.get('format_version')!r}")
    fm = artifact.get("feature_manifest") or {}
    recorded = artifact.get("manifest_digest", "")
    if fm and recorded and manifest_digest(fm) != recorded:
        raise ManifestMismatchError("artifact manifest digest does not match its manifest")
    params = _params_from_obj(artifact["params"])
    trees = tuple(_node_from_obj(t) for t in artifact["trees"])
    kind = artifact["kind"]
    if kind == "adaboost_r2":
        return AdaBoostModel(estimators=trees,
                             betas=tuple(float(b) for b in artifact["betas"]),
                             params=params, n_features=int(artifact["n_features"]),
                             feature_manifest_hash=recorded)
    if kind not in ("random_forest", "extra_trees"):
        raise SchemaError(f"unknown model kind {kind!r}")
    return ForestModel(kind=kind, trees=trees, params=params,
                       n_features=int(artifact["n_features"]),
                       feature_manifest_hash=recorded)


def save_model(model: Model, path: str | Path, feature_manifest: dict | None = None,
               extras: dict | None = None) -> None:
    artifact = model_to_artifact(model, feature_manifest, extras)
    Path(path).write_text(json.dumps(artifact, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> tuple[Model, dict]:
    artifact = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_artifact(artifact), artifact
