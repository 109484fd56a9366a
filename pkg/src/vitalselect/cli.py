"""Command-line entry point: synthesize, extract, select, rfe, evaluate, compare.

Relative output paths resolve against ``$VITALSELECT_OUT_DIR`` when set.
Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext

import numpy as np

from vitalselect import baselines, evalproto, fitness, sigsynth
from vitalselect.features import FeatureError, FeatureMatrix, extract_all, window_records
from vitalselect.nsga2 import GaConfig, ObjectiveMode
from vitalselect.preprocess import impute

OUT_DIR_ENV = "VITALSELECT_OUT_DIR"
log = logging.getLogger("vitalselect")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def out_path(path):
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _ensure_parent(path):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _write_json(path, doc):
    path = out_path(path)
    _ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_text(path, text):
    path = out_path(path)
    _ensure_parent(path)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}") from exc


def _load_features(path) -> FeatureMatrix:
    try:
        matrix = FeatureMatrix.read_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (FeatureError, ValueError) as exc:
        raise DataError(f"bad feature file {path}: {exc}") from exc
    return impute(matrix, by_session=True)


def _load_mask(path, names):
    if path is None:
        return None
    doc = _load_json(path)
    if "features" not in doc and "best" in doc:
        doc = doc["best"]
    if "features" not in doc:
        raise DataError(f"{path} holds no feature list")
    try:
        return baselines.mask_from_names(doc["features"], names)
    except KeyError as exc:
        raise DataError(f"{path}: {exc.args[0]}") from exc


def _split_sizes(text, n_subjects):
    if text is None:
        if n_subjects < 12:
            raise DataError(f"only {n_subjects} subjects; pass --split explicitly")
        return (n_subjects - 8, 4, 4)
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--split expects three comma-separated integers, got {text!r}")
    if len(sizes) != 3:
        raise UsageError("--split expects TRAIN,VALIDATION,TEST")
    return sizes


def _executor(jobs):
    return ThreadPoolExecutor(jobs) if jobs > 1 else nullcontext(None)


# -- commands -------------------------------------------------------------------

SYNTH_DEFAULTS = {"n_subjects": 50, "duration_s": 30.0, "sample_rate_hz": 20.0,
                  "activities": [a.value for a in sigsynth.ACTIVITIES],
                  "positions": [p.value for p in sigsynth.POSITIONS]}


def cmd_synth(args):
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict) or "seed" not in cfg:
        raise DataError(f"{args.config}: config must be an object with a 'seed' field")
    unknown = set(cfg) - set(SYNTH_DEFAULTS) - {"seed"}
    if unknown:
        raise DataError(f"{args.config}: unknown config keys {sorted(unknown)}")
    opts = {**SYNTH_DEFAULTS, **cfg}
    try:
        seed = int(opts["seed"])
        n = int(opts["n_subjects"])
        if n < 1:
            raise DataError("n_subjects must be >= 1")
        records = sigsynth.synthesize_dataset(seed, n, opts["activities"], opts["positions"],
                                              float(opts["duration_s"]), float(opts["sample_rate_hz"]))
    except (TypeError, ValueError) as exc:
        raise DataError(f"{args.config}: {exc}") from exc
    out = out_path(args.out)
    sigsynth.write_dataset(records, out, seed, sigsynth.generate_profiles(seed, n))
    print(f"wrote {len(records)} sessions to {out}")


def cmd_extract(args):
    try:
        records = sigsynth.read_dataset(args.dataset)
        matrix = extract_all(window_records(records, args.win_s, args.step_s))
    except (sigsynth.SynthError, FeatureError) as exc:
        raise DataError(str(exc)) from exc
    path = _write_text(args.out, matrix.to_csv())
    print(f"wrote {len(matrix)} windows x {matrix.n_features} features to {path}")


def _fitness_options(args):
    return {"classifier": args.classifier, "n_trees": args.n_trees, "forest_seed": args.seed,
            "objective_mode": args.objective_mode, "identification_trees": args.identification_trees}


def cmd_select(args):
    matrix = _load_features(args.features)
    subjects = sorted(set(matrix.subject.tolist()))
    split = evalproto.split_subjects(subjects, args.seed, _split_sizes(args.split, len(subjects)))
    cfg = GaConfig(population_size=args.pop_size, max_generations=args.generations, seed=args.seed,
                   objective_mode=args.objective_mode)
    telemetry = out_path(args.telemetry) if args.telemetry else None
    if telemetry:
        _ensure_parent(telemetry)
    with _executor(args.jobs) as ex:
        res = evalproto.select_mask(matrix, split, cfg, args.surrogate, executor=ex,
                                    telemetry_path=telemetry, **_fitness_options(args))
    best = res.archive.best()
    doc = {
        "config": {"pop_size": cfg.population_size, "generations": cfg.max_generations,
                   "seed": cfg.seed, "objective_mode": cfg.objective_mode,
                   "surrogate": bool(args.surrogate), "classifier": args.classifier,
                   "n_trees": args.n_trees,
                   "identification_trees": args.identification_trees or args.n_trees},
        "split": split.to_dict(),
        "n_evaluations": res.n_evaluations,
        "archive": res.archive.to_dict(matrix.names)["members"],
        "best": best.to_dict(matrix.names),
    }
    path = _write_json(args.out, doc)
    print(f"archive of {len(res.archive)} masks written to {path}; best keeps "
          f"{int(best.mask.sum())} features, objectives {tuple(round(v, 4) for v in best.objectives)}")


def cmd_rfe(args):
    matrix = _load_features(args.features)
    subjects = sorted(set(matrix.subject.tolist()))
    split = evalproto.split_subjects(subjects, args.seed, _split_sizes(args.split, len(subjects)))
    rows = np.isin(matrix.subject, split.train_subjects)
    X, y = matrix.values[rows], matrix.activity[rows]
    if args.n_features is None:
        mask, scores = baselines.rfe_cv(X, y, folds=args.folds, seed=args.seed, step=args.step,
                                        n_trees=args.n_trees, return_scores=True)
        extra = {"method": "rfe_cv", "cv_accuracy": {str(k): v for k, v in sorted(scores.items())}}
    else:
        if not 1 <= args.n_features <= matrix.n_features:
            raise UsageError(f"--n-features must be in [1, {matrix.n_features}]")
        mask = baselines.rfe(X, y, args.n_features, step=args.step, seed=args.seed, n_trees=args.n_trees)
        extra = {"method": "rfe"}
    extra.update(seed=args.seed, split=split.to_dict())
    path = _write_text(args.out, baselines.mask_to_json(mask, matrix.names, **extra))
    print(f"kept {int(mask.sum())} features; mask written to {path}")


def _run_protocol(matrix, mask, args):
    if args.protocol == "logo":
        return evalproto.run_logo(matrix, mask, args.repeats, args.seed, n_trees=args.n_trees, n_jobs=args.jobs)
    if args.protocol == "loso":
        return evalproto.run_loso(matrix, mask, args.n_trees, args.seed, n_jobs=args.jobs)
    subjects = sorted(set(matrix.subject.tolist()))
    split = evalproto.split_subjects(subjects, args.seed, _split_sizes(args.split, len(subjects)))
    return evalproto.run_split(matrix, split, mask, args.n_trees, args.seed, n_jobs=args.jobs)


def cmd_evaluate(args):
    matrix = _load_features(args.features)
    mask = _load_mask(args.mask, matrix.names)
    report = _run_protocol(matrix, mask, args)
    report.config["seed"] = args.seed
    paths = report.write(out_path(args.out_dir), args.prefix, include_timing=args.timing)
    ident = report.identification_accuracy
    print(f"{args.protocol}: recognition {report.recognition_accuracy:.4f}"
          + (f", identification {ident:.4f}" if ident is not None else "")
          + f"; report in {paths[0]}")


def cmd_compare(args):
    matrix = _load_features(args.features)
    entries = [("all_features", None)]
    for item in args.mask:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--mask expects NAME=PATH, got {item!r}")
        entries.append((name, _load_mask(path, matrix.names)))
    rows = [evalproto.comparison_row(name, _run_protocol(matrix, mask, args)) for name, mask in entries]
    path = _write_text(args.out, evalproto.rows_to_csv(rows))
    for r in rows:
        ident = r["identification_accuracy"]
        print(f"{r['method']:>16}  n={r['n_features']:<4} rec={r['recognition_accuracy']:.4f}"
              + (f"  id={ident:.4f}" if ident is not None else ""))
    print(f"comparison written to {path}")


# -- parser -----------------------------------------------------------------------

def _mode(text):
    mode = text.replace("-", "_")
    if mode not in ObjectiveMode.ALL:
        raise argparse.ArgumentTypeError("expected suppress-identity or suppress-activity")
    return mode


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p, n_trees=100):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-trees", type=_positive, default=n_trees, help="trees per random forest")
    p.add_argument("--jobs", type=_positive, default=1, help="worker threads")
    p.add_argument("--split", help="subject split sizes TRAIN,VALIDATION,TEST (default N-8,4,4)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vitalselect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic session dataset")
    p.add_argument("config", help="JSON with seed (required), n_subjects, duration_s, sample_rate_hz")
    p.add_argument("--out", default="dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="windowed feature extraction to CSV")
    p.add_argument("dataset")
    p.add_argument("out")
    p.add_argument("--win-s", type=float, default=10.0)
    p.add_argument("--step-s", type=float, default=1.0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select", help="multi-objective feature selection")
    p.add_argument("features")
    p.add_argument("--out", default="archive.json")
    _common(p, n_trees=20)
    p.add_argument("--pop-size", type=_positive, default=50)
    p.add_argument("--generations", type=int, default=30)
    p.add_argument("--surrogate", action="store_true", help="PCA + 3-NN fitness")
    p.add_argument("--identification-trees", type=_positive,
                   help="trees for the small identification model (default: --n-trees)")
    p.add_argument("--objective-mode", type=_mode, default=ObjectiveMode.SUPPRESS_IDENTITY)
    p.add_argument("--classifier", choices=("forest", "knn"), default="forest")
    p.add_argument("--telemetry", help="JSON-lines per-generation log (includes wall times)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("rfe", help="recursive feature elimination baseline")
    p.add_argument("features")
    p.add_argument("--out", default="rfe_mask.json")
    _common(p)
    p.add_argument("--n-features", type=int, help="fixed target size; omit for cross-validated size")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--step", type=_positive, default=1)
    p.set_defaults(func=cmd_rfe)

    for name, func, helptext in (("evaluate", cmd_evaluate, "evaluate one mask under a protocol"),
                                 ("compare", cmd_compare, "compare all features against masks")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("features")
        _common(p)
        p.add_argument("--protocol", choices=("logo", "loso", "split"), default="logo")
        p.add_argument("--repeats", type=_positive, default=20)
        p.set_defaults(func=func)
    evaluate, compare = sub.choices["evaluate"], sub.choices["compare"]
    evaluate.add_argument("--mask", help="mask or archive JSON; omit for all features")
    evaluate.add_argument("--out-dir", default="report")
    evaluate.add_argument("--prefix", default="report")
    evaluate.add_argument("--timing", action="store_true", help="include wall times in the report")
    compare.add_argument("--mask", action="append", default=[], metavar="NAME=PATH")
    compare.add_argument("--out", default="comparison.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"vitalselect: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, sigsynth.SynthError, FeatureError, evalproto.ProtocolError,
            fitness.FitnessError, ValueError, OSError) as exc:
        print(f"vitalselect: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
