import importlib

import numpy as np
import pytest

from vitalselect import _backend, _pykernels

try:
    ck = importlib.import_module("vitalselect._ckernels")
except ImportError:  # extension not built
    ck = None

needs_ext = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


def test_backend_reports_a_known_name():
    assert _backend.BACKEND in ("cython", "python")


def test_splitmix_reference_values():
    # reference stream for seed 1234567 from the published algorithm
    g = _pykernels.SplitMix64(1234567)
    assert [g.next() for _ in range(3)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423]


def brute_counts(x, m, r):
    n = len(x)
    cm = [sum(max(abs(x[i + k] - x[j + k]) for k in range(m)) <= r for j in range(n - m + 1))
          for i in range(n - m + 1)]
    cm1 = [sum(max(abs(x[i + k] - x[j + k]) for k in range(m + 1)) <= r for j in range(n - m))
           for i in range(n - m)]
    b = sum(max(abs(x[i + k] - x[j + k]) for k in range(m)) <= r
            for i in range(n - m) for j in range(n - m) if i != j)
    a = sum(max(abs(x[i + k] - x[j + k]) for k in range(m + 1)) <= r
            for i in range(n - m) for j in range(n - m) if i != j)
    return cm, cm1, b, a


@pytest.mark.parametrize("seed", range(5))
def test_template_counts_match_loops(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=int(rng.integers(8, 40)))
    r = 0.2 * x.std()
    got = _pykernels.template_counts(x, 2, r)
    want = brute_counts(x.tolist(), 2, r)
    assert got[0].tolist() == want[0]
    assert got[1].tolist() == want[1]
    assert got[2:] == want[2:]


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree_on_template_counts(seed):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(size=60), 1)  # rounding forces ties at the radius
    for m in (1, 2, 3):
        py = _pykernels.template_counts(x, m, 0.3)
        c = ck.template_counts(x, m, 0.3)
        assert np.array_equal(py[0], c[0]) and np.array_equal(py[1], c[1])
        assert py[2:] == tuple(c[2:])


@needs_ext
@pytest.mark.parametrize("seed", range(4))
def test_backends_grow_identical_trees(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(150, 7)), 2)
    y = (X[:, 0] + rng.normal(0, 0.5, 150) > 0).astype(np.intp) + (X[:, 3] > 1)
    boot = rng.integers(0, 150, 150)
    t_py = _pykernels.build_tree(X, boot, y, 3, 2, seed + 99)
    t_c = ck.build_tree(X, boot, y, 3, 2, seed + 99)
    for a, b in zip(t_py, t_c):
        assert np.array_equal(np.asarray(a), np.asarray(b))
    Q = rng.normal(size=(40, 7))
    assert np.array_equal(_pykernels.apply_tree(Q, *t_py[:4]), ck.apply_tree(Q, *t_c[:4]))


def test_tree_leaves_are_pure_on_separable_data():
    X = np.arange(20, dtype=float).reshape(-1, 1)
    y = (np.arange(20) >= 10).astype(np.intp)
    feature, threshold, left, right, counts, gain = _pykernels.build_tree(X, np.arange(20), y, 2, 1, 0)
    assert feature[0] == 0 and threshold[0] == pytest.approx(9.5)
    leaves = feature < 0
    assert np.all((counts[leaves] > 0).sum(axis=1) == 1)
    assert gain[0] == pytest.approx(20 * 0.5 - 0 - 0)
