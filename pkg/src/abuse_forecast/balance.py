"""Minority oversampling on training folds.

The minority group is "conversations that received abuse" (y >= 1).
Synthetic rows are convex combinations of a minority row and one of its
k nearest minority neighbours; the regression target interpolates with
the same lambda.  Neighbour distance uses the standardized dense block
only, but interpolation covers the whole row including any bag-of-words
tail (kept real-valued; trees do not need integer counts).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, TooFewMinorityError, WidthMismatchError
from .features import FeatureVector


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0  # minority size relative to majority after augmentation
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.target_ratio <= 0:
            raise ValueError("target_ratio must be positive")


def interpolate(base_x: np.ndarray, nbr_x: np.ndarray, base_y: float,
                nbr_y: float, lam: float) -> tuple[np.ndarray, float]:
    """One synthetic sample: x and y move by the same lambda."""
    return base_x + lam * (nbr_x - base_x), base_y + lam * (nbr_y - base_y)


def smote_matrix(X: np.ndarray, y: np.ndarray, minority: np.ndarray,
                 cfg: SmoteConfig, dense_width: int | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Matrix form of smote_augment; originals stay a prefix of the output."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    minority = np.asarray(minority, dtype=bool)
    if X.ndim != 2:
        raise WidthMismatchError("X must be a 2-D matrix")
    if not (len(X) == len(y) == len(minority)):
        raise LengthMismatchError("X, y and minority must have equal lengths")
    min_idx = np.flatnonzero(minority)
    n_min, n_maj = len(min_idx), int(len(X) - len(min_idx))
    if n_min < cfg.k_neighbors + 1:
        raise TooFewMinorityError(
            f"{n_min} minority rows, need at least {cfg.k_neighbors + 1}")
    need = int(round(cfg.target_ratio * n_maj)) - n_min
    if need <= 0:
        return X.copy(), y.copy()

    dw = X.shape[1] if dense_width is None else dense_width
    M = X[min_idx, :dw]
    # pairwise Euclidean on the dense block; self excluded via +inf
    d2 = ((M[:, None, :] - M[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    # argsort is stable, so distance ties resolve by original order
    nbr_table = np.argsort(d2, axis=1, kind="stable")[:, : cfg.k_neighbors]

    rng = np.random.default_rng(cfg.seed)
    synth_X = np.empty((need, X.shape[1]))
    synth_y = np.empty(need)
    for s in range(need):
        b = s % n_min  # round-robin over bases for even coverage
        nbr = nbr_table[b, rng.integers(cfg.k_neighbors)]
        lam = rng.uniform()
        sx, sy = interpolate(X[min_idx[b]], X[min_idx[nbr]],
                             float(y[min_idx[b]]), float(y[min_idx[nbr]]), lam)
        synth_X[s] = sx
        synth_y[s] = sy
    return np.vstack([X, synth_X]), np.concatenate([y, synth_y])


def smote_augment(X: list[FeatureVector], y: list[float], minority: list[bool],
                  cfg: SmoteConfig) -> tuple[list[FeatureVector], list[float]]:
    """FeatureVector form: dense blocks drive distance, bow interpolates too."""
    if not (len(X) == len(y) == len(minority)):
        raise LengthMismatchError("X, y and minority must have equal lengths")
    widths = {v.width for v in X}
    if len(widths) > 1:
        raise WidthMismatchError(f"mixed dense widths: {sorted(widths)}")
    has_bow = any(v.bow for v in X)
    vocab_size = 0
    if has_bow:
        vocab_size = 1 + max(j for v in X for j in (v.bow or {}))
    dense_width = X[0].width
    M = np.zeros((len(X), dense_width + vocab_size))
    for i, v in enumerate(X):
        M[i, :dense_width] = v.dense
        for j, c in (v.bow or {}).items():
            M[i, dense_width + j] = c
    M2, y2 = smote_matrix(M, np.asarray(y, dtype=float),
                          np.asarray(minority, dtype=bool), cfg,
                          dense_width=dense_width)
    out: list[FeatureVector] = []
    for i in range(M2.shape[0]):
        bow = None
        if has_bow:
            tail = M2[i, dense_width:]
            tail = np.maximum(tail, 0.0)
            bow = {j: float(c) for j, c in enumerate(tail) if c != 0.0}
        out.append(FeatureVector(dense=M2[i, :dense_width], bow=bow))
    return out, list(y2)
