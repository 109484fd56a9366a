"""Dual-model fitness for feature masks, and its PCA + k-NN surrogate.

For a mask the recognition model (activity labels) is trained on the
training subjects and scored on the evaluation subjects, giving ``a_R``;
the identification model (subject labels) is trained on the evaluation
group's sitting rows and scored on its lying rows, giving ``a_I``. The
objectives are ``(a_R, 1 - a_I, a_R - a_I)``, or the task roles swapped
when suppressing activity instead of identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from vitalselect import classifiers as clf
from vitalselect.features import FeatureMatrix
from vitalselect.nsga2 import PENALTY, ObjectiveMode
from vitalselect.preprocess import apply_scaler_array, fit_scaler_array

TRAIN_POSITION = "Sitting"
TEST_POSITION = "Lying"


class FitnessError(ValueError):
    pass


@dataclass(frozen=True)
class TaskData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_eval: np.ndarray
    y_eval: np.ndarray


@dataclass(frozen=True)
class FitnessContext:
    recognition: TaskData
    identification: TaskData
    train_subjects: tuple
    eval_subjects: tuple
    classifier: str = "forest"
    n_trees: int = 100
    identification_trees: Optional[int] = None  # None -> n_trees
    forest_seed: int = 0
    knn_k: int = 3
    pca_dims: int = 5
    objective_mode: str = ObjectiveMode.SUPPRESS_IDENTITY
    n_jobs: int = 1

    @property
    def n_features(self):
        return self.recognition.X_train.shape[1]


def _standardized(train, other):
    sc = fit_scaler_array(train)
    return apply_scaler_array(sc, train), apply_scaler_array(sc, other)


def build_context(matrix: FeatureMatrix, train_subjects, eval_subjects, **options) -> FitnessContext:
    """Assemble both tasks from an imputed feature matrix.

    Each task is standardized with a scaler fitted on its own training rows.
    """
    train_subjects = tuple(sorted(int(s) for s in train_subjects))
    eval_subjects = tuple(sorted(int(s) for s in eval_subjects))
    if set(train_subjects) & set(eval_subjects):
        raise FitnessError("training and evaluation subjects overlap")
    if not np.all(np.isfinite(matrix.values)):
        raise FitnessError("feature matrix must be imputed first")
    tr = np.isin(matrix.subject, train_subjects)
    ev = np.isin(matrix.subject, eval_subjects)
    id_tr = ev & (matrix.position == TRAIN_POSITION)
    id_te = ev & (matrix.position == TEST_POSITION)
    if not tr.any() or not ev.any():
        raise FitnessError("empty training or evaluation rows")
    if not id_tr.any() or not id_te.any():
        raise FitnessError("evaluation group lacks sitting or lying rows")
    X = matrix.values
    r_tr, r_ev = _standardized(X[tr], X[ev])
    i_tr, i_te = _standardized(X[id_tr], X[id_te])
    rec = TaskData(r_tr, matrix.activity[tr], r_ev, matrix.activity[ev])
    ident = TaskData(i_tr, matrix.subject[id_tr], i_te, matrix.subject[id_te])
    return FitnessContext(rec, ident, train_subjects, eval_subjects, **options)


def objectives_from_accuracies(a_r: float, a_i: float, mode: str = ObjectiveMode.SUPPRESS_IDENTITY):
    if mode == ObjectiveMode.SUPPRESS_IDENTITY:
        return (a_r, 1.0 - a_i, a_r - a_i)
    if mode == ObjectiveMode.SUPPRESS_ACTIVITY:
        return (a_i, 1.0 - a_r, a_i - a_r)
    raise FitnessError(f"unknown objective mode {mode!r}")


def _score(task: TaskData, cols, ctx: FitnessContext, kind: str, n_trees: int) -> float:
    Xtr = task.X_train[:, cols]
    Xev = task.X_eval[:, cols]
    if kind == "forest":
        model = clf.forest_fit(Xtr, task.y_train, n_trees, ctx.forest_seed, n_jobs=ctx.n_jobs)
        pred = clf.forest_predict(model, Xev)
    elif kind == "knn":
        model = clf.knn_fit(Xtr, task.y_train, k=min(ctx.knn_k, Xtr.shape[0]))
        pred = clf.knn_predict(model, Xev)
    elif kind == "pca_knn":
        dims = min(ctx.pca_dims, len(cols), Xtr.shape[0])
        pca = pca_fit(Xtr, dims)
        model = clf.knn_fit(pca_transform(pca, Xtr), task.y_train, k=min(ctx.knn_k, Xtr.shape[0]))
        pred = clf.knn_predict(model, pca_transform(pca, Xev))
    else:
        raise FitnessError(f"unknown classifier {kind!r}")
    return clf.accuracy(pred, task.y_eval)


def accuracies(mask, ctx: FitnessContext, surrogate: bool = False) -> tuple[float, float]:
    """(a_R, a_I) for the selected columns."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != ctx.n_features:
        raise FitnessError(f"mask has {mask.shape[0]} bits, catalog has {ctx.n_features}")
    cols = np.flatnonzero(mask)
    kind = "pca_knn" if surrogate else ctx.classifier
    id_trees = ctx.identification_trees or ctx.n_trees
    return (_score(ctx.recognition, cols, ctx, kind, ctx.n_trees),
            _score(ctx.identification, cols, ctx, kind, id_trees))


def evaluate(mask, ctx: FitnessContext):
    """Objective triple for ``mask``; empty masks get the penalty triple."""
    if not np.any(mask):
        return PENALTY
    return objectives_from_accuracies(*accuracies(mask, ctx), ctx.objective_mode)


def evaluate_surrogate(mask, ctx: FitnessContext):
    """Cheaper proxy: PCA to ``pca_dims`` (clamped to the mask size) then 3-NN."""
    if not np.any(mask):
        return PENALTY
    return objectives_from_accuracies(*accuracies(mask, ctx, surrogate=True), ctx.objective_mode)


def make_fitness(ctx: FitnessContext, surrogate: bool = False):
    return (lambda m: evaluate_surrogate(m, ctx)) if surrogate else (lambda m: evaluate(m, ctx))


# -- PCA ----------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, dims), orthonormal columns
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray = field(default=None)

    @property
    def dims(self):
        return self.components.shape[1]


def pca_fit(rows, dims: int = 5) -> PcaModel:
    """Top-``dims`` eigenvectors of the sample covariance.

    Each component is signed so its largest-magnitude loading is positive.
    """
    X = np.asarray(rows, dtype=np.float64)
    n, d = X.shape
    if dims < 1 or dims > min(n, d):
        raise FitnessError(f"dims must be in [1, {min(n, d)}], got {dims}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order[:dims]]
    pivot = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivot, np.arange(dims)])
    evecs = evecs * np.where(signs == 0, 1.0, signs)
    total = evals.sum()
    ratio = evals[:dims] / total if total > 0 else np.zeros(dims)
    return PcaModel(mean, evecs, ratio, evals[:dims])


def pca_transform(model: PcaModel, rows) -> np.ndarray:
    return (np.asarray(rows, dtype=np.float64) - model.mean) @ model.components
