"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the script works regardless of
VITALSELECT_PURE_PYTHON. Results are checked for equality before timing.
"""
import argparse
import importlib
import time

import numpy as np

from vitalselect import _pykernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x = rng.normal(size=200)
    X = rng.normal(size=(3000, 189))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.intp) + (X[:, 2] > 1)
    boot = rng.integers(0, 3000, 3000)
    Q = rng.normal(size=(3000, 189))
    tree = _pykernels.build_tree(X, boot, y, 3, 13, 7)[:4]
    return {
        "template_counts n=200": lambda k: k.template_counts(x, 2, 0.2),
        "build_tree 3000x189": lambda k: k.build_tree(X, boot, y, 3, 13, 7),
        "apply_tree 3000 rows": lambda k: k.apply_tree(Q, *tree),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        ck = importlib.import_module("vitalselect._ckernels")
    except ImportError:
        print("compiled kernels not built; run `pip install --no-build-isolation -e .` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        a, b = fn(_pykernels), fn(ck)
        same = all(np.array_equal(np.asarray(u), np.asarray(v))
                   for u, v in zip(np.atleast_1d(a) if not isinstance(a, tuple) else a,
                                   np.atleast_1d(b) if not isinstance(b, tuple) else b))
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        t_py = best_of(lambda: fn(_pykernels), args.repeat)
        t_c = best_of(lambda: fn(ck), args.repeat)
        print(f"{name:<26}{t_py * 1e3:>12.2f}{t_c * 1e3:>12.2f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
