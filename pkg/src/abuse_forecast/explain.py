"""Attribution and correlation analytics.

Shapley values for forests use the path-dependent formulation: node
covers are recomputed by routing a caller-supplied background sample
through each tree, and a coalition's value routes the instance at
in-coalition splits while averaging cover-weighted over both children
elsewhere.  With the training set as background every node keeps
nonzero cover (split thresholds always separate at least one training
row per side); a zero-cover subtree is valued 0 by convention in both
the fast path and the oracle.

The brute-force oracle enumerates all 2^d coalitions against the same
value function and exists to pin the per-leaf polynomial algebra of
the fast path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import Corpus, Label
from .ensembles import ForestModel, Leaf, TreeNode, predict_batch, tree_predict
from .errors import (
    ConfigError,
    LengthMismatchError,
    TooWideError,
    WidthMismatchError,
    ZeroVarianceError,
)
from .features import (
    Family,
    FeatureMask,
    Stage,
    ac_block,
    mt_block,
    schema,
    te_dense_block,
    tw_block,
    _pp,
)
from .lexicons import LexiconRegistry


@dataclass(frozen=True)
class Attribution:
    values: tuple[float, ...]
    base_value: float
    prediction: float

    def as_dict(self, columns: list[str] | None = None) -> dict[str, float]:
        names = columns if columns is not None else [
            f"f{i}" for i in range(len(self.values))]
        return dict(zip(names, self.values))


def _covers(tree: TreeNode, background: np.ndarray) -> dict[int, int]:
    cover: dict[int, int] = {}
    stack = [(tree, np.arange(background.shape[0]))]
    while stack:
        node, rows = stack.pop()
        cover[id(node)] = len(rows)
        if isinstance(node, Leaf):
            continue
        go_left = background[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return cover


def _shapley_weights(d: int) -> list[float]:
    fact = math.factorial
    return [fact(k) * fact(d - 1 - k) / fact(d) for k in range(d)]


def _poly_without(factors: list[tuple[float, float]], skip: int) -> list[float]:
    """Coefficients of prod_{j != skip} (b_j + a_j t), ascending powers."""
    poly = [1.0]
    for j, (b, a) in enumerate(factors):
        if j == skip:
            continue
        nxt = [0.0] * (len(poly) + 1)
        for k, c in enumerate(poly):
            nxt[k] += c * b
            nxt[k + 1] += c * a
        poly = nxt
    return poly


def _tree_shap(tree: TreeNode, x: np.ndarray, cover: dict[int, int],
               phi: np.ndarray) -> None:
    def walk(node: TreeNode, a: dict[int, float], b: dict[int, float]) -> None:
        if isinstance(node, Leaf):
            feats = sorted(a)
            d = len(feats)
            if d == 0:
                return
            weights = _shapley_weights(d)
            factors = [(b[f], a[f]) for f in feats]
            for j, f in enumerate(feats):
                if a[f] == b[f]:
                    continue
                poly = _poly_without(factors, j)
                phi[f] += node.value * (a[f] - b[f]) * sum(
                    c * weights[k] for k, c in enumerate(poly))
            return
        f = node.feature
        total = cover[id(node)]
        ind_left = 1.0 if x[f] <= node.threshold else 0.0
        for child, ind in ((node.left, ind_left), (node.right, 1.0 - ind_left)):
            ratio = cover[id(child)] / total if total > 0 else 0.0
            new_a = dict(a)
            new_b = dict(b)
            new_a[f] = a.get(f, 1.0) * ind
            new_b[f] = b.get(f, 1.0) * ratio
            if new_a[f] == 0.0 and new_b[f] == 0.0:
                continue  # leaf factor zero in every coalition
            walk(child, new_a, new_b)

    walk(tree, {}, {})


def shap_attribute(model: ForestModel, x, background) -> Attribution:
    if not isinstance(model, ForestModel):
        raise ConfigError("attribution supports forest models only "
                          "(weighted medians are not additive across trees)")
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ConfigError("background must be non-empty")
    if x.shape[0] != model.n_features or background.shape[1] != model.n_features:
        raise WidthMismatchError("instance/background width must match the model")
    phi = np.zeros(model.n_features)
    base = 0.0
    for tree in model.trees:
        cover = _covers(tree, background)
        _tree_shap(tree, x, cover, phi)
        base += float(tree_predict(tree, background).mean())
    n = len(model.trees)
    phi /= n
    base /= n
    return Attribution(values=tuple(float(v) for v in phi), base_value=base,
                       prediction=float(predict_batch(model, x[None, :])[0]))


# ---------------------------------------------------------------------------
# oracle

def _expvalue(node: TreeNode, x: np.ndarray, coalition: frozenset,
              cover: dict[int, int]) -> float:
    if isinstance(node, Leaf):
        return node.value
    if node.feature in coalition:
        nxt = node.left if x[node.feature] <= node.threshold else node.right
        return _expvalue(nxt, x, coalition, cover)
    total = cover[id(node)]
    if total == 0:
        return 0.0
    return (
        cover[id(node.left)] * _expvalue(node.left, x, coalition, cover)
        + cover[id(node.right)] * _expvalue(node.right, x, coalition, cover)
    ) / total


def brute_force_shapley(model: ForestModel, x, background) -> Attribution:
    """Exact Shapley by full coalition enumeration; widths above 12 refused."""
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    d = model.n_features
    if d > 12:
        raise TooWideError(f"enumeration over 2^{d} coalitions refused")
    if x.shape[0] != d or background.shape[1] != d:
        raise WidthMismatchError("instance/background width must match the model")
    covers = [_covers(t, background) for t in model.trees]

    def value(coalition: frozenset) -> float:
        return float(np.mean([
            _expvalue(t, x, coalition, c) for t, c in zip(model.trees, covers)]))

    fact = math.factorial
    phi = np.zeros(d)
    all_features = list(range(d))
    for subset_bits in range(1 << d):
        coalition = frozenset(f for f in all_features if subset_bits >> f & 1)
        s = len(coalition)
        v = value(coalition)
        for i in all_features:
            if i in coalition:
                # v counts as v(S ∪ {i}) for S = coalition - {i}
                phi[i] += fact(s - 1) * fact(d - s) / fact(d) * v
            else:
                phi[i] -= fact(s) * fact(d - s - 1) / fact(d) * v
    return Attribution(values=tuple(float(v) for v in phi),
                       base_value=value(frozenset()),
                       prediction=float(predict_batch(model, x[None, :])[0]))


# ---------------------------------------------------------------------------
# rankings

@dataclass(frozen=True)
class ImportanceRanking:
    entries: tuple[tuple[str, float], ...]  # (column, mean |phi|), descending
    raw: np.ndarray  # per-sample attributions, n x d

    def __post_init__(self) -> None:
        values = [v for _, v in self.entries]
        if any(a < b for a, b in zip(values, values[1:])):
            raise ValueError("entries must be non-increasing")


def importance_ranking(model: ForestModel, sample, background,
                       columns: list[str] | None = None) -> ImportanceRanking:
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if sample.shape[0] == 0:
        raise ConfigError("sample must be non-empty")
    raw = np.stack([
        shap_attribute(model, row, background).values for row in sample])
    names = columns if columns is not None else [
        f"f{i}" for i in range(model.n_features)]
    means = np.abs(raw).mean(axis=0)
    order = sorted(range(len(names)), key=lambda i: (-means[i], i))
    return ImportanceRanking(
        entries=tuple((names[i], float(means[i])) for i in order), raw=raw)


# ---------------------------------------------------------------------------
# correlations

def pearson(a, b) -> float:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatchError(f"lengths differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ConfigError("pearson needs at least two pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("pearson undefined for constant input")
    r = float(np.sum(dx * dy)) / (sx * sy)
    return max(-1.0, min(1.0, r))


class CorrelationTarget(str, Enum):
    ABUSIVE_REPLY_COUNT = "abusive_reply_count"
    NEUTRAL_REPLY_COUNT = "neutral_reply_count"


_BLOCK_FN = {
    "te": lambda c, stage, registry, stopwords: te_dense_block(
        c, stage, registry, stopwords),
    "mt": lambda c, stage, registry, stopwords: mt_block(c, stage, stopwords),
    "tw": lambda c, stage, registry, stopwords: tw_block(
        c, stage, registry, stopwords),
    "ac": lambda c, stage, registry, stopwords: ac_block(c),
}


def correlation_matrix(corpus: Corpus, feature_family: str,
                       target: CorrelationTarget, registry: LexiconRegistry,
                       stage: Stage = Stage.POST_HOC,
                       stopwords=None) -> dict[str, float | None]:
    """Pearson of each raw (unstandardized) dense feature against the target.

    Constant features map to None rather than a number.
    """
    if feature_family not in _BLOCK_FN:
        raise ConfigError(f"unknown feature family {feature_family!r}")
    convs = corpus.conversations
    if target is CorrelationTarget.ABUSIVE_REPLY_COUNT:
        t = np.array([c.y for c in convs], dtype=float)
    else:
        t = np.array([
            sum(1 for r in c.replies if r.label is Label.NEUTRAL)
            for c in convs], dtype=float)
    X = np.array([
        _BLOCK_FN[feature_family](c, stage, registry, stopwords) for c in convs])
    mask = FeatureMask(**{feature_family: True})
    names = [col.name for col in schema(mask, stage)
             if col.family is Family(feature_family)]
    out: dict[str, float | None] = {}
    for j, name in enumerate(names):
        try:
            out[name] = pearson(X[:, j], t)
        except ZeroVarianceError:
            out[name] = None
    return out


# ---------------------------------------------------------------------------
# top words

class ConversationClass(str, Enum):
    WITH_ABUSIVE_REPLIES = "with_abusive_replies"
    NEUTRAL_ONLY = "neutral_only"


def top_words(corpus: Corpus, conversation_class: ConversationClass,
              n: int = 10, stopwords=None) -> list[tuple[str, int]]:
    """Most frequent preprocessed parent tokens in the class; ties lexicographic."""
    counts: dict[str, int] = {}
    for c in corpus.conversations:
        is_abusive = c.y >= 1
        wanted = (conversation_class is ConversationClass.WITH_ABUSIVE_REPLIES)
        if is_abusive != wanted:
            continue
        for token in _pp(c.parent.text, stopwords).tokens:
            counts[token] = counts.get(token, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]
