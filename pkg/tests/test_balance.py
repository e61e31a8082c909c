from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abuse_forecast.balance import SmoteConfig, interpolate, smote_augment, smote_matrix
from abuse_forecast.errors import LengthMismatchError, TooFewMinorityError, WidthMismatchError
from abuse_forecast.features import FeatureVector


def test_interpolate_midpoint_and_endpoint():
    x, y = interpolate(np.array([0.0, 0.0]), np.array([2.0, 2.0]), 1.0, 3.0, 0.5)
    assert x.tolist() == [1.0, 1.0] and y == 2.0
    x, y = interpolate(np.array([0.0, 0.0]), np.array([2.0, 2.0]), 1.0, 3.0, 0.0)
    assert x.tolist() == [0.0, 0.0] and y == 1.0


def _toy(n_min=8, n_maj=20, seed=3):
    rng = np.random.default_rng(seed)
    X_min = rng.normal(4.0, 0.5, size=(n_min, 3))
    X_maj = rng.normal(0.0, 0.5, size=(n_maj, 3))
    X = np.vstack([X_min, X_maj])
    y = np.concatenate([rng.integers(1, 6, n_min), np.zeros(n_maj)])
    minority = np.array([True] * n_min + [False] * n_maj)
    return X, y, minority


def _dist_to_segment(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def test_smote_balances_to_parity():
    X, y, minority = _toy()
    cfg = SmoteConfig(k_neighbors=3, seed=11)
    X2, y2 = smote_matrix(X, y, minority, cfg)
    n_min_after = len(X2) - 20
    assert abs(n_min_after - 20) <= 1
    # originals untouched, as a prefix
    assert np.array_equal(X2[: len(X)], X)
    assert np.array_equal(y2[: len(y)], y)


def test_smote_synthetics_lie_on_minority_segments():
    X, y, minority = _toy()
    cfg = SmoteConfig(k_neighbors=3, seed=5)
    X2, y2 = smote_matrix(X, y, minority, cfg)
    minority_rows = X[minority]
    minority_y = y[minority]
    for p, py in zip(X2[len(X):], y2[len(y):]):
        best = min(
            (_dist_to_segment(p, a, b), ya, yb)
            for i, (a, ya) in enumerate(zip(minority_rows, minority_y))
            for j, (b, yb) in enumerate(zip(minority_rows, minority_y))
            if i < j
        )
        dist, ya, yb = best
        assert dist < 1e-9
        assert min(ya, yb) - 1e-9 <= py <= max(ya, yb) + 1e-9


def test_smote_deterministic():
    X, y, minority = _toy()
    cfg = SmoteConfig(k_neighbors=3, seed=7)
    a = smote_matrix(X, y, minority, cfg)
    b = smote_matrix(X, y, minority, cfg)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = smote_matrix(X, y, minority, SmoteConfig(k_neighbors=3, seed=8))
    assert not np.array_equal(a[0], c[0])


def test_smote_too_few_minority():
    X, y, minority = _toy(n_min=3)
    with pytest.raises(TooFewMinorityError):
        smote_matrix(X, y, minority, SmoteConfig(k_neighbors=5, seed=0))


def test_smote_no_need_returns_copies():
    X, y, minority = _toy(n_min=10, n_maj=8)
    X2, y2 = smote_matrix(X, y, minority, SmoteConfig(k_neighbors=3, seed=0))
    assert np.array_equal(X2, X) and X2 is not X


def test_smote_length_mismatch():
    X, y, minority = _toy()
    with pytest.raises(LengthMismatchError):
        smote_matrix(X, y[:-1], minority, SmoteConfig(seed=0))


def test_smote_feature_vector_interface_interpolates_bow():
    vecs = []
    flags = []
    ys = []
    rng = np.random.default_rng(2)
    for i in range(6):
        vecs.append(FeatureVector(dense=np.array([4.0 + rng.normal(0, 0.1), 1.0]),
                                  bow={0: 2, 1: i % 2}))
        flags.append(True)
        ys.append(float(1 + i))
    for i in range(10):
        vecs.append(FeatureVector(dense=np.array([rng.normal(0, 0.1), 0.0]),
                                  bow={2: 1}))
        flags.append(False)
        ys.append(0.0)
    out, y2 = smote_augment(vecs, ys, flags, SmoteConfig(k_neighbors=2, seed=1))
    assert len(out) == len(y2) > len(vecs)
    synth = out[len(vecs):]
    for v in synth:
        assert v.width == 2
        assert all(c >= 0 for c in (v.bow or {}).values())
        # synthetic minority rows share the minority bow columns only
        assert 2 not in (v.bow or {})


def test_smote_feature_vector_width_mismatch():
    vecs = [FeatureVector(dense=np.zeros(2)), FeatureVector(dense=np.zeros(3))]
    with pytest.raises(WidthMismatchError):
        smote_augment(vecs, [0.0, 1.0], [False, True], SmoteConfig(seed=0))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=6, max_value=12), st.integers(min_value=8, max_value=24),
       st.integers(min_value=0, max_value=999))
def test_smote_parity_property(n_min, n_maj, seed):
    X, y, minority = _toy(n_min=n_min, n_maj=n_maj, seed=seed)
    X2, y2 = smote_matrix(X, y, minority, SmoteConfig(k_neighbors=3, seed=seed))
    n_min_after = int(len(X2) - n_maj)
    if n_maj > n_min:
        assert abs(n_min_after - n_maj) <= 1
    else:
        assert n_min_after == n_min
    assert np.all(y2[len(y):] >= y[minority].min() - 1e-9)
    assert np.all(y2[len(y):] <= y[minority].max() + 1e-9)
