import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalselect import evalproto as ep
from vitalselect import fitness as fit
from vitalselect.nsga2 import PENALTY, ObjectiveMode

TRAIN = tuple(range(8))
EVAL = (8, 9, 10, 11)


@pytest.fixture(scope="module")
def ctx(small_matrix):
    return fit.build_context(small_matrix, TRAIN, EVAL, n_trees=15, forest_seed=3)


def test_objective_arithmetic():
    o = fit.objectives_from_accuracies(0.86, 0.31)
    assert o == pytest.approx((0.86, 0.69, 0.55))
    assert fit.objectives_from_accuracies(0.5, 0.5)[2] == 0
    assert fit.objectives_from_accuracies(0.2, 0.9, ObjectiveMode.SUPPRESS_ACTIVITY) == pytest.approx((0.9, 0.8, 0.7))
    with pytest.raises(fit.FitnessError):
        fit.objectives_from_accuracies(0.1, 0.1, "other")


def test_context_layout(ctx, small_matrix):
    assert ctx.n_features == 189
    rec, ident = ctx.recognition, ctx.identification
    assert set(ident.y_train.tolist()) == set(ident.y_eval.tolist()) == set(EVAL)
    assert rec.X_train.shape[0] == np.isin(small_matrix.subject, TRAIN).sum()
    assert np.allclose(rec.X_train.mean(axis=0), 0, atol=1e-9)


def test_context_rejects_overlap_and_missing_values(small_matrix):
    with pytest.raises(fit.FitnessError):
        fit.build_context(small_matrix, (0, 1, 8), EVAL)
    holes = small_matrix.values.copy()
    holes[0, 0] = np.nan
    with pytest.raises(fit.FitnessError):
        fit.build_context(small_matrix.with_values(holes), TRAIN, EVAL)


def test_evaluate_identities_and_determinism(ctx):
    rng = np.random.default_rng(0)
    for _ in range(3):
        mask = rng.random(189) < 0.3
        o = fit.evaluate(mask, ctx)
        a_r, a_i = fit.accuracies(mask, ctx)
        assert o == (a_r, 1.0 - a_i, a_r - a_i)
        assert 0 <= a_r <= 1 and 0 <= a_i <= 1
        assert fit.evaluate(mask, ctx) == o
    assert fit.evaluate(np.zeros(189, dtype=bool), ctx) == PENALTY
    with pytest.raises(fit.FitnessError):
        fit.evaluate(np.ones(10, dtype=bool), ctx)


def test_full_mask_matches_independent_protocol(ctx, small_matrix):
    a_r, a_i = fit.accuracies(np.ones(189, dtype=bool), ctx)
    run = ep.holdout_run(small_matrix, None, TRAIN, EVAL, n_trees=15, seed=3)
    assert a_r == run.recognition_accuracy
    assert a_i == run.identification_accuracy


def test_surrogate_clamps_dims_and_is_faster(ctx):
    mask = np.zeros(189, dtype=bool)
    mask[[0, 70, 130, 140]] = True
    o = fit.evaluate_surrogate(mask, ctx)
    assert len(o) == 3 and o != PENALTY
    full = np.ones(189, dtype=bool)
    t0 = time.perf_counter()
    fit.evaluate(full, ctx)
    t_full = time.perf_counter() - t0
    t0 = time.perf_counter()
    fit.evaluate_surrogate(full, ctx)
    assert time.perf_counter() - t0 < t_full


def test_make_fitness_knn_classifier(small_matrix):
    c = fit.build_context(small_matrix, TRAIN, EVAL, classifier="knn")
    mask = np.ones(189, dtype=bool)
    assert fit.make_fitness(c)(mask) == fit.evaluate(mask, c)
    assert fit.make_fitness(c, surrogate=True)(mask) == fit.evaluate_surrogate(mask, c)


# -- PCA ------------------------------------------------------------------------

def test_pca_rank_two_plane():
    rng = np.random.default_rng(0)
    basis = rng.normal(size=(2, 10))
    X = rng.normal(size=(80, 2)) @ basis
    m = fit.pca_fit(X, 2)
    assert m.explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)


def test_pca_full_rank_preserves_distances():
    X = np.random.default_rng(1).normal(size=(30, 6))
    Z = fit.pca_transform(fit.pca_fit(X, 6), X)
    dx = np.linalg.norm(X[:, None] - X[None], axis=2)
    dz = np.linalg.norm(Z[:, None] - Z[None], axis=2)
    assert np.allclose(dx, dz, atol=1e-8)


def test_pca_ratios_match_svd_oracle():
    X = np.random.default_rng(2).normal(size=(100, 189))
    m = fit.pca_fit(X, 5)
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    want = (s ** 2 / (s ** 2).sum())[:5]
    assert np.allclose(m.explained_variance_ratio, want, atol=1e-8)


@given(st.integers(0, 10_000), st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_pca_invariants(seed, dims):
    X = np.random.default_rng(seed).normal(size=(20, 7))
    m = fit.pca_fit(X, dims)
    gram = m.components.T @ m.components
    assert np.allclose(gram, np.eye(dims), atol=1e-8)
    r = m.explained_variance_ratio
    assert np.all(np.diff(r) <= 1e-12) and np.all((r >= 0) & (r <= 1)) and r.sum() <= 1 + 1e-12
    lead = m.components[np.argmax(np.abs(m.components), axis=0), np.arange(dims)]
    assert np.all(lead > 0)


def test_pca_reconstruction_beats_random_subspace():
    X = np.random.default_rng(3).normal(size=(60, 8)) * np.arange(1, 9)
    m = fit.pca_fit(X, 3)
    Xc = X - m.mean
    err = np.linalg.norm(Xc - Xc @ m.components @ m.components.T)
    q, _ = np.linalg.qr(np.random.default_rng(4).normal(size=(8, 3)))
    assert err <= np.linalg.norm(Xc - Xc @ q @ q.T)


def test_pca_dims_checked():
    with pytest.raises(fit.FitnessError):
        fit.pca_fit(np.zeros((3, 5)), 4)
