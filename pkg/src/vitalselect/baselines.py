"""Recursive feature elimination baselines (single objective)."""
from __future__ import annotations

import json
from typing import Iterator, Optional, Sequence

import numpy as np

from vitalselect import classifiers as clf


def elimination_path(train, labels, n_target: int, step: int = 1, seed: int = 0,
                     n_trees: int = 100) -> Iterator[np.ndarray]:
    """Yield surviving feature indices after each elimination round.

    Starts with all features; each round refits the forest on the survivors
    and drops the ``step`` least important (lower index first on ties),
    never going below ``n_target``.
    """
    X = np.asarray(train, dtype=np.float64)
    d = X.shape[1]
    if not 1 <= n_target <= d:
        raise ValueError(f"n_target must be in [1, {d}], got {n_target}")
    if step < 1:
        raise ValueError("step must be >= 1")
    alive = np.arange(d)
    yield alive.copy()
    while alive.shape[0] > n_target:
        model = clf.forest_fit(X[:, alive], labels, n_trees=n_trees, seed=seed)
        imp = model.feature_importances
        drop = min(step, alive.shape[0] - n_target)
        order = np.lexsort((alive, imp))
        alive = np.sort(alive[order[drop:]])
        yield alive.copy()


def rfe(train, labels, n_target: int, step: int = 1, seed: int = 0, n_trees: int = 100) -> np.ndarray:
    """Boolean mask with exactly ``n_target`` features kept by RFE."""
    d = np.asarray(train).shape[1]
    alive = None
    for alive in elimination_path(train, labels, n_target, step, seed, n_trees):
        pass
    mask = np.zeros(d, dtype=bool)
    mask[alive] = True
    return mask


def size_grid(d: int) -> list[int]:
    grid = [s for s in [5, 10] + list(range(20, d, 10)) if s < d]
    return grid + [d]


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold id per row with each class spread evenly over the folds."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        if rows.shape[0] < folds:
            raise ValueError(f"class {cls!r} has {rows.shape[0]} rows, fewer than {folds} folds")
        rows = rng.permutation(rows)
        fold_of[rows] = np.arange(rows.shape[0]) % folds
    return fold_of


def rfe_cv(train, labels, folds: int = 5, seed: int = 0, step: int = 1, n_trees: int = 100,
           grid: Optional[Sequence[int]] = None, return_scores: bool = False):
    """RFE with the subset size chosen by stratified k-fold accuracy.

    Each fold runs one elimination path down to the smallest grid size and
    scores the survivors at every grid size. The size with the best mean
    accuracy wins (smaller size on ties); the returned mask is RFE on all
    rows at that size.
    """
    X = np.asarray(train, dtype=np.float64)
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    d = X.shape[1]
    grid = sorted(set(grid)) if grid is not None else size_grid(d)
    fold_of = stratified_folds(labels, folds, seed)
    scores = {s: [] for s in grid}
    for k in range(folds):
        tr, te = fold_of != k, fold_of == k
        wanted = set(grid)
        for alive in elimination_path(X[tr], labels[tr], min(grid), step, seed, n_trees):
            if alive.shape[0] in wanted:
                model = clf.forest_fit(X[tr][:, alive], labels[tr], n_trees=n_trees, seed=seed)
                pred = clf.forest_predict(model, X[te][:, alive])
                scores[alive.shape[0]].append(clf.accuracy(pred, labels[te]))
                wanted.discard(alive.shape[0])
        if wanted:
            raise RuntimeError(f"elimination path skipped sizes {sorted(wanted)}; use step=1")
    means = {s: float(np.mean(v)) for s, v in scores.items()}
    best = max(grid, key=lambda s: (means[s], -s))
    mask = rfe(X, labels, best, step, seed, n_trees)
    return (mask, means) if return_scores else mask


def mask_to_json(mask, names: Sequence[str], **extra) -> str:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != len(names):
        raise ValueError("mask length does not match the catalog")
    doc = {"features": [names[i] for i in np.flatnonzero(mask)], "n_features": int(mask.sum())}
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def mask_from_names(selected: Sequence[str], names: Sequence[str]) -> np.ndarray:
    """Boolean mask over ``names``; unknown feature names raise ``KeyError``."""
    pos = {n: i for i, n in enumerate(names)}
    unknown = [s for s in selected if s not in pos]
    if unknown:
        raise KeyError("unknown feature names: " + ", ".join(unknown))
    mask = np.zeros(len(names), dtype=bool)
    mask[[pos[s] for s in selected]] = True
    return mask
