import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalselect import classifiers as clf


def knn_oracle(train, labels, query, k):
    out = []
    for q in query:
        d = [(float(np.sqrt(((t - q) ** 2).sum())), lab) for t, lab in zip(train, labels)]
        d.sort()
        near = d[:k]
        votes = {}
        for dist, lab in near:
            n, s = votes.get(lab, (0, 0.0))
            votes[lab] = (n + 1, s + dist)
        out.append(min(votes, key=lambda lab: (-votes[lab][0], votes[lab][1], lab)))
    return np.array(out)


@pytest.mark.parametrize("seed", range(10))
def test_knn_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(30, 3)).astype(float)  # many distance ties
    y = rng.integers(0, 3, 30)
    Q = rng.integers(0, 4, size=(15, 3)).astype(float)
    for k in (1, 3, 4):
        pred = clf.knn_predict(clf.knn_fit(X, y, k), Q)
        assert pred.tolist() == knn_oracle(X, y, Q, k).tolist()


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_knn_invariant_to_training_order(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(20, 2)).astype(float)
    y = rng.integers(0, 3, 20)
    Q = rng.integers(0, 3, size=(10, 2)).astype(float)
    perm = rng.permutation(20)
    a = clf.knn_predict(clf.knn_fit(X, y, 3), Q)
    b = clf.knn_predict(clf.knn_fit(X[perm], y[perm], 3), Q)
    assert a.tolist() == b.tolist()


def test_knn_k1_recovers_training_labels():
    X = np.arange(12.0).reshape(6, 2)
    y = np.array(list("abcabc"))
    assert clf.knn_predict(clf.knn_fit(X, y, 1), X).tolist() == list(y)


def test_knn_cosine_and_errors():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    m = clf.knn_fit(X, [0, 1], k=1, metric="cosine")
    assert clf.knn_predict(m, [[5.0, 0.1], [0.1, 9.0]]).tolist() == [0, 1]
    with pytest.raises(clf.ClassifierError):
        clf.knn_fit(X, [0, 1], k=3)
    with pytest.raises(clf.ClassifierError):
        clf.knn_fit(X, [0, 1], metric="manhattan")


def blobs(seed, n=200, d=6):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    X = rng.normal(size=(n, d))
    X[:, 0] += 3 * y
    return X, y


def test_forest_learns_and_is_deterministic():
    X, y = blobs(0)
    Xt, yt = blobs(1)
    a = clf.forest_fit(X, y, n_trees=25, seed=4)
    b = clf.forest_fit(X, y, n_trees=25, seed=4, n_jobs=3)
    pa, pb = clf.forest_predict(a, Xt), clf.forest_predict(b, Xt)
    assert np.array_equal(pa, pb)
    assert np.array_equal(a.feature_importances, b.feature_importances)
    assert clf.accuracy(pa, yt) > 0.9


def test_importances_point_at_the_signal():
    X, y = blobs(2)
    imp = clf.feature_importances(clf.forest_fit(X, y, n_trees=30, seed=0))
    assert imp.sum() == pytest.approx(1.0)
    assert np.all(imp >= 0)
    assert np.argmax(imp) == 0
    names = [f"f{i}" for i in range(6)]
    top = clf.top_k_features(clf.forest_fit(X, y, n_trees=30, seed=0), names, 2)
    assert top[0][0] == "f0" and len(top) == 2


def test_importances_uniform_without_splits():
    X = np.random.default_rng(0).normal(size=(10, 4))
    m = clf.forest_fit(X, np.zeros(10, dtype=int), n_trees=3)
    assert np.allclose(m.feature_importances, 0.25)
    assert clf.forest_predict(m, X).tolist() == [0] * 10


def test_forest_string_labels_and_column_check():
    X, y = blobs(3, n=60)
    labels = np.array(["Apnea", "Guided", "Normal"])[y]
    m = clf.forest_fit(X, labels, n_trees=5)
    assert set(clf.forest_predict(m, X)) <= set(labels)
    with pytest.raises(clf.ClassifierError):
        clf.forest_predict(m, X[:, :3])


def test_max_features_rule():
    assert clf.forest_fit(*blobs(0, n=30, d=189), n_trees=1).max_features == 13
    assert clf.forest_fit(*blobs(0, n=30, d=3), n_trees=1, max_features="all").max_features == 3


def test_accuracy_and_confusion():
    pred = np.array([0, 1, 1, 2, 2, 2])
    truth = np.array([0, 1, 2, 2, 2, 1])
    cm = clf.confusion(pred, truth, [0, 1, 2])
    assert cm.counts.tolist() == [[1, 0, 0], [0, 1, 1], [0, 1, 2]]
    assert cm.accuracy == clf.accuracy(pred, truth) == pytest.approx(4 / 6)
    both = cm + cm
    assert both.total == 12 and both.accuracy == cm.accuracy
    assert np.allclose(both.row_normalized().sum(axis=1), 1)
    assert cm.to_csv().splitlines()[1] == "0,1,0,0"
    with pytest.raises(clf.ClassifierError):
        clf.accuracy([], [])
