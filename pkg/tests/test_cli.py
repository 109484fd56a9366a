import hashlib
import json
import os

import numpy as np
import pytest

from vitalselect import cli, fitness
from vitalselect import nsga2 as ga
from vitalselect.features import FeatureMatrix
from vitalselect.toyproblem import all_masks


def run(*argv):
    return cli.main([str(a) for a in argv])


def digest(path):
    h = hashlib.sha256()
    for root, _, files in sorted(os.walk(path)):
        for name in sorted(files):
            with open(os.path.join(root, name), "rb") as fh:
                h.update(name.encode() + fh.read())
    return h.hexdigest()


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"seed": 4, "n_subjects": 2}))
    return p


def test_synth_default_cohort(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"seed": 1}')
    assert run("synth", p, "--out", tmp_path / "d") == 0
    files = [f for f in os.listdir(tmp_path / "d") if f.endswith(".csv")]
    assert len(files) == 400


def test_synth_is_reproducible(tmp_path, cfg):
    assert run("synth", cfg, "--out", tmp_path / "a") == 0
    assert run("synth", cfg, "--out", tmp_path / "b") == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


@pytest.mark.parametrize("body", ['{"n_subjects": 3}', "not json", '{"seed": 1, "colour": 2}',
                                  '{"seed": 1, "n_subjects": 0}'])
def test_synth_rejects_bad_configs(tmp_path, body, capsys):
    p = tmp_path / "c.json"
    p.write_text(body)
    assert run("synth", p, "--out", tmp_path / "d") == 2
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        run("select")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("evaluate", "x.csv", "--protocol", "kfold")
    assert exc.value.code == 1


def test_extract_rows_header_and_idempotence(tmp_path, cfg):
    run("synth", cfg, "--out", tmp_path / "d")
    assert run("extract", tmp_path / "d", tmp_path / "f.csv") == 0
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines[0].split(",")) == 192
    assert len(lines) - 1 == 16 * 21
    first = (tmp_path / "f.csv").read_bytes()
    run("extract", tmp_path / "d", tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_bytes() == first


def test_extract_names_corrupt_file(tmp_path, cfg, capsys):
    run("synth", cfg, "--out", tmp_path / "d")
    victim = sorted(f for f in os.listdir(tmp_path / "d") if f.endswith(".csv"))[3]
    (tmp_path / "d" / victim).write_text("garbage\n")
    assert run("extract", tmp_path / "d", tmp_path / "f.csv") == 2
    assert victim in capsys.readouterr().err


def test_missing_manifest_is_data_error(tmp_path):
    assert run("extract", tmp_path, tmp_path / "f.csv") == 2


def toy_matrix(seed=0):
    """Twelve columns: four carry activity, four carry identity, four are noise."""
    rng = np.random.default_rng(seed)
    acts, poss = ["Normal", "Reading", "Guided", "Apnea"], ["Sitting", "Lying"]
    rows, subj, act, pos = [], [], [], []
    for s in range(16):
        for a_i, a in enumerate(acts):
            for p in poss:
                for _ in range(3):
                    v = rng.normal(size=12)
                    v[:4] += a_i * np.array([3.0, 2.0, 1.0, 0.5])
                    v[4:8] += s * np.array([3.0, 2.0, 1.0, 0.5])
                    rows.append(v)
                    subj.append(s)
                    act.append(a)
                    pos.append(p)
    return FeatureMatrix(np.array(rows), [f"t{i}" for i in range(12)], subj, act, pos)


def test_select_on_toy_csv_matches_exhaustive_front(tmp_path):
    m = toy_matrix()
    m.write_csv(tmp_path / "toy.csv")
    assert run("select", tmp_path / "toy.csv", "--classifier", "knn", "--split", "8,4,4",
               "--pop-size", 50, "--generations", 50, "--seed", 3, "--out", tmp_path / "a.json") == 0
    doc = json.loads((tmp_path / "a.json").read_text())
    got = {tuple(round(v, 12) for v in e["objectives"]) for e in doc["archive"]}

    split = doc["split"]
    ctx = fitness.build_context(m, split["train"], split["validation"], classifier="knn")
    table = np.array([fitness.evaluate(mask, ctx) for mask in all_masks()])
    front = table[~ga.dominance_matrix(table).any(axis=0)]
    want = {tuple(round(v, 12) for v in row) for row in front}
    assert got <= want
    assert len(got) >= 0.8 * len(want)
    assert max(got, key=lambda o: (o[2], o[0])) == max(want, key=lambda o: (o[2], o[0]))


def test_select_writes_telemetry_and_is_parallel_safe(tmp_path, small_matrix):
    small_matrix.write_csv(tmp_path / "f.csv")
    common = ["select", tmp_path / "f.csv", "--split", "4,4,4", "--pop-size", 6,
              "--generations", 2, "--n-trees", 5]
    assert run(*common, "--out", tmp_path / "a.json", "--telemetry", tmp_path / "t.jsonl") == 0
    assert run(*common, "--out", tmp_path / "b.json", "--jobs", 3) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert len((tmp_path / "t.jsonl").read_text().splitlines()) == 3


def test_evaluate_full_mask_equals_baseline(tmp_path, small_matrix):
    small_matrix.write_csv(tmp_path / "f.csv")
    (tmp_path / "all.json").write_text(json.dumps({"features": small_matrix.names}))
    base = ["evaluate", tmp_path / "f.csv", "--repeats", 2, "--n-trees", 5]
    assert run(*base, "--out-dir", tmp_path / "r1") == 0
    assert run(*base, "--mask", tmp_path / "all.json", "--out-dir", tmp_path / "r2") == 0
    assert digest(tmp_path / "r1") == digest(tmp_path / "r2")
    files = sorted(os.listdir(tmp_path / "r1"))
    assert "report.json" in files and "report_identification_confusion.csv" in files


def test_unknown_mask_names_listed(tmp_path, small_matrix, capsys):
    small_matrix.write_csv(tmp_path / "f.csv")
    (tmp_path / "m.json").write_text(json.dumps({"features": ["chest_mean", "heart_magic"]}))
    assert run("evaluate", tmp_path / "f.csv", "--mask", tmp_path / "m.json") == 2
    assert "heart_magic" in capsys.readouterr().err


def test_rfe_and_compare(tmp_path, small_matrix):
    small_matrix.write_csv(tmp_path / "f.csv")
    assert run("rfe", tmp_path / "f.csv", "--n-features", 150, "--step", 20, "--n-trees", 5,
               "--split", "8,2,2", "--out", tmp_path / "rfe.json") == 0
    doc = json.loads((tmp_path / "rfe.json").read_text())
    assert doc["n_features"] == 150 and len(doc["features"]) == 150
    assert run("compare", tmp_path / "f.csv", "--mask", f"rfe={tmp_path / 'rfe.json'}",
               "--protocol", "loso", "--n-trees", 5, "--out", tmp_path / "cmp.csv") == 0
    lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == ["all_features", "rfe"]
    assert run("compare", tmp_path / "f.csv", "--mask", "nameless") == 1


def test_output_dir_override(tmp_path, cfg, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "outroot"))
    assert run("synth", cfg, "--out", "ds") == 0
    assert (tmp_path / "outroot" / "ds" / "manifest.json").exists()


def test_reversed_objectives_swap_task_roles(tmp_path, small_matrix):
    small_matrix.write_csv(tmp_path / "f.csv")
    assert run("select", tmp_path / "f.csv", "--objective-mode", "suppress-activity", "--split", "4,4,4",
               "--pop-size", 8, "--generations", 2, "--n-trees", 10, "--identification-trees", 15,
               "--out", tmp_path / "a.json") == 0
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["config"]["objective_mode"] == "suppress_activity"
    split = doc["split"]
    ctx = fitness.build_context(small_matrix, split["train"], split["validation"],
                                n_trees=10, identification_trees=15, forest_seed=0)
    for member in doc["archive"]:
        mask = np.array([c == "1" for c in member["mask"]])
        a_r, a_i = fitness.accuracies(mask, ctx)
        assert member["objectives"] == pytest.approx([a_i, 1 - a_r, a_i - a_r], abs=1e-12)
