"""k-NN and Random Forest classifiers, accuracy and confusion matrices.

The forest grows unpruned Gini trees on bootstrap samples, considering
``floor(sqrt(d))`` random features per node. Tree growth runs in the
kernel backend; everything else is numpy.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vitalselect._backend import kernels


class ClassifierError(ValueError):
    pass


def _check_train(X, labels):
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClassifierError("training data must be a nonempty 2-D array")
    if labels.shape[0] != X.shape[0]:
        raise ClassifierError("one label per training row required")
    return X, labels


# -- k-NN -------------------------------------------------------------------

@dataclass
class KnnModel:
    X: np.ndarray
    codes: np.ndarray
    classes: np.ndarray
    k: int = 3
    metric: str = "euclidean"


def knn_fit(train, labels, k: int = 3, metric: str = "euclidean") -> KnnModel:
    X, labels = _check_train(train, labels)
    if k < 1 or k > X.shape[0]:
        raise ClassifierError(f"k must be in [1, {X.shape[0]}], got {k}")
    if metric not in ("euclidean", "cosine"):
        raise ClassifierError(f"unknown metric {metric!r}")
    classes, codes = np.unique(labels, return_inverse=True)
    return KnnModel(X, codes, classes, k, metric)


def _distances(model, Q):
    T = model.X
    if model.metric == "cosine":
        tn = np.linalg.norm(T, axis=1)
        qn = np.linalg.norm(Q, axis=1)
        tn = np.where(tn > 0, tn, 1.0)
        qn = np.where(qn > 0, qn, 1.0)
        return 1.0 - (Q / qn[:, None]) @ (T / tn[:, None]).T
    # per-pair squared differences keep each distance independent of row order
    chunk = max(1, int(4e6 // max(1, T.shape[0] * T.shape[1])))
    out = np.empty((Q.shape[0], T.shape[0]))
    for s in range(0, Q.shape[0], chunk):
        diff = Q[s:s + chunk, None, :] - T[None, :, :]
        out[s:s + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def knn_predict(model: KnnModel, rows) -> np.ndarray:
    """Majority vote of the k nearest rows.

    Neighbours are ranked by (distance, label); vote ties go to the class
    with the smaller summed distance, then to the lower label.
    """
    Q = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if Q.shape[1] != model.X.shape[1]:
        raise ClassifierError(f"expected {model.X.shape[1]} columns, got {Q.shape[1]}")
    D = _distances(model, Q)
    k = model.k
    n_classes = model.classes.shape[0]
    # lexsort: primary key distance, secondary key class code
    codes_b = np.broadcast_to(model.codes, D.shape)
    if k < D.shape[1]:
        part = np.argpartition(D, k - 1, axis=1)
        kth = np.take_along_axis(D, part[:, k - 1:k], axis=1)
        # candidates: everything at or below the k-th distance
        cand = D <= kth
    else:
        cand = np.ones_like(D, dtype=bool)
    out = np.empty(Q.shape[0], dtype=np.intp)
    for i in range(Q.shape[0]):
        idx = np.flatnonzero(cand[i])
        order = np.lexsort((codes_b[i, idx], D[i, idx]))[:k]
        nb = idx[order]
        votes = np.bincount(model.codes[nb], minlength=n_classes)
        dsum = np.bincount(model.codes[nb], weights=D[i, nb], minlength=n_classes)
        best = votes.max()
        tied = np.flatnonzero(votes == best)
        if tied.shape[0] > 1:
            tied = tied[dsum[tied] == dsum[tied].min()]
        out[i] = tied[0]
    return model.classes[out]


# -- forest -----------------------------------------------------------------

@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    gain: np.ndarray

    @property
    def leaf_class(self):
        return np.argmax(self.counts, axis=1)

    @property
    def n_splits(self):
        return int(np.count_nonzero(self.feature >= 0))


@dataclass
class ForestModel:
    trees: list
    classes: np.ndarray
    n_features: int
    max_features: int
    tree_seeds: list
    feature_importances: np.ndarray = field(default=None)

    @property
    def n_trees(self):
        return len(self.trees)


def _max_features(rule, d):
    if rule == "sqrt":
        return max(1, int(math.floor(math.sqrt(d))))
    if rule is None or rule == "all":
        return d
    return max(1, min(d, int(rule)))


def _grow_one(X, codes, n_classes, max_features, seed):
    n = X.shape[0]
    boot = np.random.default_rng(seed).integers(0, n, n)
    return Tree(*kernels.build_tree(X, boot, codes, n_classes, max_features, seed))


def forest_fit(train, labels, n_trees: int = 100, seed: int = 0,
               max_features="sqrt", n_jobs: int = 1) -> ForestModel:
    """Fit a bagged Gini forest; deterministic in ``seed`` for any ``n_jobs``."""
    X, labels = _check_train(train, labels)
    classes, codes = np.unique(labels, return_inverse=True)
    codes = codes.astype(np.intp)
    mf = _max_features(max_features, X.shape[1])
    seeds = [int(s) for s in np.random.default_rng(seed).integers(0, 2**63 - 1, n_trees)]
    if n_jobs > 1 and n_trees > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            trees = list(ex.map(lambda s: _grow_one(X, codes, classes.shape[0], mf, s), seeds))
    else:
        trees = [_grow_one(X, codes, classes.shape[0], mf, s) for s in seeds]
    model = ForestModel(trees, classes, X.shape[1], mf, seeds)
    model.feature_importances = _importances(model)
    return model


def forest_predict(model: ForestModel, rows) -> np.ndarray:
    """Majority vote over trees; vote ties go to the lowest label."""
    Q = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
    if Q.shape[1] != model.n_features:
        raise ClassifierError(f"expected {model.n_features} columns, got {Q.shape[1]}")
    n_classes = model.classes.shape[0]
    votes = np.zeros((Q.shape[0], n_classes), dtype=np.int64)
    rows_idx = np.arange(Q.shape[0])
    for tree in model.trees:
        leaves = kernels.apply_tree(Q, tree.feature, tree.threshold, tree.left, tree.right)
        np.add.at(votes, (rows_idx, tree.leaf_class[leaves]), 1)
    return model.classes[np.argmax(votes, axis=1)]


def _importances(model: ForestModel) -> np.ndarray:
    d = model.n_features
    total = np.zeros(d)
    used = 0
    for tree in model.trees:
        split = tree.feature >= 0
        if not split.any():
            continue
        n_root = tree.counts[0].sum()
        per = np.bincount(tree.feature[split], weights=tree.gain[split] / n_root, minlength=d)
        if per.sum() > 0:
            total += per / per.sum()
            used += 1
    if used == 0 or total.sum() <= 0:
        return np.full(d, 1.0 / d)
    return total / total.sum()


def feature_importances(model: ForestModel) -> np.ndarray:
    """Mean decrease in Gini impurity per feature, summing to 1."""
    return model.feature_importances.copy()


def top_k_features(model: ForestModel, names: Sequence[str], k: int = 20):
    imp = model.feature_importances
    order = np.lexsort((np.arange(imp.shape[0]), -imp))[:k]
    return [(names[i], float(imp[i])) for i in order]


# -- scoring ------------------------------------------------------------------

def accuracy(pred, truth) -> float:
    """Fraction of positions where prediction equals ground truth."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape[0] == 0 or pred.shape != truth.shape:
        raise ClassifierError("pred and truth must be nonempty and equally long")
    return float(np.mean(pred == truth))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    labels: list

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.counts.sum())

    def __add__(self, other):
        if list(other.labels) != list(self.labels):
            raise ClassifierError("cannot add confusion matrices with different labels")
        return ConfusionMatrix(self.counts + other.counts, list(self.labels))

    def row_normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, sums, out=np.zeros(self.counts.shape), where=sums > 0)

    def to_csv(self, normalized: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth\\pred", *self.labels])
        data = self.row_normalized() if normalized else self.counts
        for lab, row in zip(self.labels, data):
            w.writerow([lab, *[format(v, ".6g") if normalized else int(v) for v in row]])
        return buf.getvalue()


def confusion(pred, truth, labels=None) -> ConfusionMatrix:
    """Counts indexed [truth, prediction]."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape[0] == 0 or pred.shape != truth.shape:
        raise ClassifierError("pred and truth must be nonempty and equally long")
    if labels is None:
        labels = sorted(set(truth.tolist()) | set(pred.tolist()))
    pos = {lab: i for i, lab in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth.tolist(), pred.tolist()):
        m[pos[t], pos[p]] += 1
    return ConfusionMatrix(m, list(labels))
