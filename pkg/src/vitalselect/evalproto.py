"""Evaluation protocols: fixed split, leave-one-group-out, leave-one-subject-out.

Recognition models always train and test on disjoint subjects. The
identification model is trained on the held-out group's sitting sessions
and tested on its lying sessions, with subjects relabelled by their slot
in the sorted group so confusion matrices can be summed across repeats.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from vitalselect import classifiers as clf
from vitalselect import fitness as fit
from vitalselect.features import FeatureMatrix, extract_all, window_records
from vitalselect.nsga2 import GaConfig, evolve
from vitalselect.preprocess import apply_scaler_array, fit_scaler_array, impute
from vitalselect.sigsynth import ACTIVITIES, synthesize_dataset

ACTIVITY_LABELS = [a.value for a in ACTIVITIES]


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_subjects: tuple
    validation_subjects: tuple
    test_subjects: tuple
    group_size: int = 4

    def __post_init__(self):
        parts = [set(self.train_subjects), set(self.validation_subjects), set(self.test_subjects)]
        if sum(len(p) for p in parts) != len(set().union(*parts)):
            raise ProtocolError("split parts overlap")
        if len(self.test_subjects) != self.group_size:
            raise ProtocolError("test part must hold exactly one group")

    def to_dict(self):
        return {"train": list(self.train_subjects), "validation": list(self.validation_subjects),
                "test": list(self.test_subjects), "group_size": self.group_size}


def split_subjects(subject_ids, rng=None, sizes=(42, 4, 4)) -> SplitSpec:
    """Uniformly random train/validation/test partition of ``subject_ids``."""
    ids = sorted(int(s) for s in set(subject_ids))
    if len(sizes) != 3 or min(sizes) < 0 or sum(sizes) != len(ids):
        raise ProtocolError(f"sizes {tuple(sizes)} do not partition {len(ids)} subjects")
    order = np.random.default_rng(rng).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    a, b = sizes[0], sizes[0] + sizes[1]
    return SplitSpec(tuple(sorted(shuffled[:a])), tuple(sorted(shuffled[a:b])),
                     tuple(sorted(shuffled[b:])), group_size=sizes[2])


# -- single holdout run -------------------------------------------------------

@dataclass
class RunResult:
    test_subjects: tuple
    recognition_accuracy: float
    recognition_confusion: clf.ConfusionMatrix
    identification_accuracy: Optional[float] = None
    identification_confusion: Optional[clf.ConfusionMatrix] = None
    wall_time_s: float = 0.0

    def to_dict(self, include_timing=False):
        d = {"test_subjects": list(self.test_subjects),
             "recognition_accuracy": self.recognition_accuracy,
             "identification_accuracy": self.identification_accuracy}
        if include_timing:
            d["wall_time_s"] = self.wall_time_s
        return d


def _columns(matrix, mask):
    if mask is None:
        return np.arange(matrix.n_features)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != matrix.n_features:
        raise ProtocolError(f"mask has {mask.shape[0]} bits, catalog has {matrix.n_features}")
    if not mask.any():
        raise ProtocolError("mask selects no features")
    return np.flatnonzero(mask)


def _fit_predict(Xtr, ytr, Xte, n_trees, seed, n_jobs):
    sc = fit_scaler_array(Xtr)
    model = clf.forest_fit(apply_scaler_array(sc, Xtr), ytr, n_trees=n_trees, seed=seed, n_jobs=n_jobs)
    return clf.forest_predict(model, apply_scaler_array(sc, Xte))


def recognition_run(matrix: FeatureMatrix, cols, train_subjects, test_subjects,
                    n_trees=100, seed=0, n_jobs=1):
    tr = np.isin(matrix.subject, list(train_subjects))
    te = np.isin(matrix.subject, list(test_subjects))
    overlap = set(matrix.subject[tr].tolist()) & set(matrix.subject[te].tolist())
    assert not overlap, f"subjects on both sides of a recognition fold: {sorted(overlap)}"
    if not tr.any() or not te.any():
        raise ProtocolError("empty recognition train or test rows")
    X = matrix.values[:, cols]
    pred = _fit_predict(X[tr], matrix.activity[tr], X[te], n_trees, seed, n_jobs)
    cm = clf.confusion(pred, matrix.activity[te], ACTIVITY_LABELS)
    return cm.accuracy, cm


def identification_run(matrix: FeatureMatrix, cols, group, n_trees=100, seed=0, n_jobs=1):
    group = sorted(int(s) for s in group)
    slot = {s: i for i, s in enumerate(group)}
    ing = np.isin(matrix.subject, group)
    tr = ing & (matrix.position == fit.TRAIN_POSITION)
    te = ing & (matrix.position == fit.TEST_POSITION)
    for s in group:
        has = matrix.subject == s
        if not (has & tr).any() or not (has & te).any():
            raise ProtocolError(f"subject {s} lacks sitting or lying sessions")
    X = matrix.values[:, cols]
    ytr = np.array([slot[s] for s in matrix.subject[tr].tolist()])
    yte = np.array([slot[s] for s in matrix.subject[te].tolist()])
    pred = _fit_predict(X[tr], ytr, X[te], n_trees, seed, n_jobs)
    cm = clf.confusion(pred, yte, list(range(len(group))))
    return cm.accuracy, cm


def holdout_run(matrix, mask, train_subjects, test_subjects, n_trees=100, seed=0,
                n_jobs=1, identify=True) -> RunResult:
    t0 = time.perf_counter()
    cols = _columns(matrix, mask)
    r_acc, r_cm = recognition_run(matrix, cols, train_subjects, test_subjects, n_trees, seed, n_jobs)
    res = RunResult(tuple(sorted(int(s) for s in test_subjects)), r_acc, r_cm)
    if identify:
        res.identification_accuracy, res.identification_confusion = identification_run(
            matrix, cols, test_subjects, n_trees, seed, n_jobs)
    res.wall_time_s = time.perf_counter() - t0
    return res


# -- reports ------------------------------------------------------------------

@dataclass
class ExperimentReport:
    protocol: str
    runs: list
    recognition_confusion: clf.ConfusionMatrix
    identification_confusion: Optional[clf.ConfusionMatrix]
    selected: list
    config: dict = field(default_factory=dict)

    @property
    def recognition_accuracy(self) -> float:
        return self.recognition_confusion.accuracy

    @property
    def identification_accuracy(self) -> Optional[float]:
        if self.identification_confusion is None:
            return None
        return self.identification_confusion.accuracy

    @property
    def wall_times(self):
        return [r.wall_time_s for r in self.runs]

    @property
    def gap(self) -> Optional[float]:
        if self.identification_accuracy is None:
            return None
        return self.recognition_accuracy - self.identification_accuracy

    def to_dict(self, include_timing=False) -> dict:
        d = {
            "protocol": self.protocol,
            "recognition_accuracy": self.recognition_accuracy,
            "identification_accuracy": self.identification_accuracy,
            "n_runs": len(self.runs),
            "runs": [r.to_dict(include_timing) for r in self.runs],
            "selected_features": list(self.selected),
            "n_selected": len(self.selected),
            "config": self.config,
        }
        if include_timing:
            d["wall_times_s"] = self.wall_times
        return d

    def write(self, out_dir, prefix="report", include_timing=False) -> list[str]:
        """JSON summary plus confusion CSVs; returns the written paths."""
        os.makedirs(out_dir, exist_ok=True)
        paths = [os.path.join(out_dir, f"{prefix}.json")]
        with open(paths[0], "w") as fh:
            json.dump(self.to_dict(include_timing), fh, indent=2, sort_keys=True)
            fh.write("\n")
        cms = [("recognition", self.recognition_confusion), ("identification", self.identification_confusion)]
        for task, cm in cms:
            if cm is None:
                continue
            for norm in (False, True):
                p = os.path.join(out_dir, f"{prefix}_{task}_confusion{'_normalized' if norm else ''}.csv")
                with open(p, "w", newline="") as fh:
                    fh.write(cm.to_csv(normalized=norm))
                paths.append(p)
        return paths


def _summed(cms):
    cms = [c for c in cms if c is not None]
    if not cms:
        return None
    total = cms[0]
    for c in cms[1:]:
        total = total + c
    return total


def _report(protocol, runs, matrix, mask, config):
    cols = _columns(matrix, mask)
    return ExperimentReport(protocol, runs,
                            _summed([r.recognition_confusion for r in runs]),
                            _summed([r.identification_confusion for r in runs]),
                            [matrix.names[i] for i in cols], config)


def _seed_int(rng):
    return int(np.random.default_rng(rng).integers(0, 2**31 - 1))


def run_logo(matrix: FeatureMatrix, mask=None, repeats: int = 20, rng=0, group_size: int = 4,
             n_trees: int = 100, n_jobs: int = 1) -> ExperimentReport:
    """Repeated leave-one-group-out: shuffle, hold out one group, train on the rest.

    Reported accuracies are trace/total of the confusion matrices summed
    over repeats.
    """
    subjects = sorted(set(matrix.subject.tolist()))
    if len(subjects) < 2 * group_size:
        raise ProtocolError(f"need at least {2 * group_size} subjects for groups of {group_size}")
    if repeats < 1:
        raise ProtocolError("repeats must be >= 1")
    gen = np.random.default_rng(rng)
    runs = []
    for _ in range(repeats):
        order = gen.permutation(len(subjects))
        group = [subjects[i] for i in order[:group_size]]
        rest = [subjects[i] for i in order[group_size:]]
        runs.append(holdout_run(matrix, mask, rest, group, n_trees, _seed_int(gen), n_jobs))
    config = {"repeats": repeats, "group_size": group_size, "n_trees": n_trees}
    return _report("logo", runs, matrix, mask, config)


def run_loso(matrix: FeatureMatrix, mask=None, n_trees: int = 100, seed: int = 0,
             n_jobs: int = 1) -> ExperimentReport:
    """One recognition fold per subject; identification is not defined here."""
    subjects = sorted(set(matrix.subject.tolist()))
    if len(subjects) < 2:
        raise ProtocolError("need at least 2 subjects")
    runs = [holdout_run(matrix, mask, [t for t in subjects if t != s], [s], n_trees, seed,
                        n_jobs, identify=False)
            for s in subjects]
    return _report("loso", runs, matrix, mask, {"n_trees": n_trees, "seed": seed})


def run_split(matrix: FeatureMatrix, split: SplitSpec, mask=None, n_trees: int = 100,
              seed: int = 0, n_jobs: int = 1) -> ExperimentReport:
    """Train on the training part, test on the test group."""
    run = holdout_run(matrix, mask, split.train_subjects, split.test_subjects, n_trees, seed, n_jobs)
    return _report("split", [run], matrix, mask, {"n_trees": n_trees, "seed": seed,
                                                   "split": split.to_dict()})


# -- selection pipelines --------------------------------------------------------

def select_mask(matrix: FeatureMatrix, split: SplitSpec, config: GaConfig, surrogate=False,
                executor=None, telemetry_path=None, **fitness_options):
    """Evolve on training vs validation subjects; returns the evolution result."""
    fitness_options.setdefault("objective_mode", config.objective_mode)
    ctx = fit.build_context(matrix, split.train_subjects, split.validation_subjects, **fitness_options)
    return evolve(config, fit.make_fitness(ctx, surrogate), matrix.n_features,
                  telemetry_path=telemetry_path, executor=executor)


def sweep_ga(matrix: FeatureMatrix, pop_sizes: Sequence[int], gen_counts: Sequence[int],
             repeats: int = 10, seed: int = 0, sizes=(42, 4, 4), eval_trees: int = 100,
             surrogate=False, **fitness_options) -> list[dict]:
    """Mean test-group accuracies of the picked archive member per grid cell."""
    if not pop_sizes or not gen_counts:
        raise ProtocolError("empty parameter grid")
    subjects = sorted(set(matrix.subject.tolist()))
    rows = []
    for pop in pop_sizes:
        for gens in gen_counts:
            rec, ident = [], []
            for rep in range(repeats):
                split = split_subjects(subjects, [seed, rep], sizes)
                cfg = GaConfig(population_size=pop, max_generations=gens, seed=seed + rep)
                best = select_mask(matrix, split, cfg, surrogate, **fitness_options).archive.best()
                run = holdout_run(matrix, best.mask, split.train_subjects, split.test_subjects,
                                  eval_trees, seed + rep)
                rec.append(run.recognition_accuracy)
                ident.append(run.identification_accuracy)
            rows.append({"pop_size": pop, "generations": gens, "repeats": repeats,
                         "recognition_accuracy": float(np.mean(rec)),
                         "identification_accuracy": float(np.mean(ident))})
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Optional[Sequence[str]] = None) -> str:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: format(v, ".10g") if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def comparison_row(method: str, report: ExperimentReport) -> dict:
    return {"method": method, "n_features": len(report.selected),
            "recognition_accuracy": report.recognition_accuracy,
            "identification_accuracy": report.identification_accuracy,
            "gap": report.gap}


# -- synthetic benchmark ----------------------------------------------------------

def synthetic_benchmark(seed: int = 7, n_subjects: int = 50, step_s: float = 3.0,
                        win_s: float = 10.0, duration_s: float = 30.0,
                        sample_rate_hz: float = 20.0) -> FeatureMatrix:
    """Synthesize a cohort, extract windowed features and impute per session."""
    records = synthesize_dataset(seed, n_subjects, duration_s=duration_s, sample_rate_hz=sample_rate_hz)
    return impute(extract_all(window_records(records, win_s, step_s)), by_session=True)
