"""Pure-Python/numpy versions of the compiled kernels.

Every function here mirrors one in ``_ckernels.pyx`` and must produce
bit-identical results; the test suite checks the two against each other.
"""
import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_MIN_GAIN = 1e-10


class SplitMix64:
    """64-bit splitmix generator shared by both kernel backends."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def template_counts(x, m, r):
    """Chebyshev template matches used by approximate and sample entropy.

    Returns ``(cm, cm1, b, a)``: per-template self-inclusive match counts of
    length ``m`` over all ``N-m+1`` templates, the same for length ``m+1``
    over ``N-m`` templates, and ordered-pair (self excluded) match counts of
    length ``m`` and ``m+1`` over the first ``N-m`` templates.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    nt = n - m + 1
    # dist[i, j] = max_k |x[i+k] - x[j+k]|, built one lag at a time
    dist = np.zeros((nt, nt))
    for k in range(m):
        seg = x[k:k + nt]
        np.maximum(dist, np.abs(seg[:, None] - seg[None, :]), out=dist)
    match_m = dist <= r
    cm = match_m.sum(axis=1).astype(np.int64)

    nt1 = n - m
    seg = x[m:m + nt1]
    extra = np.abs(seg[:, None] - seg[None, :]) <= r
    match_m1 = match_m[:nt1, :nt1] & extra
    cm1 = match_m1.sum(axis=1).astype(np.int64)

    b = int(match_m[:nt1, :nt1].sum()) - nt1
    a = int(match_m1.sum()) - nt1
    return cm, cm1, b, a


def _best_split(X, idx, y, n_classes, feat, parent_val):
    vals = X[idx, feat]
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    boundary = v[:-1] < v[1:]
    if not boundary.any():
        return None
    n = idx.shape[0]
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y[idx][order]] = 1
    cl = np.cumsum(onehot, axis=0)[:-1]
    cr = cl[-1] + onehot[-1] - cl
    n_left = np.arange(1, n, dtype=np.int64)
    n_right = n - n_left
    sq_left = (cl * cl).sum(axis=1)
    sq_right = (cr * cr).sum(axis=1)
    child = (n_left - sq_left / n_left) + (n_right - sq_right / n_right)
    child = np.where(boundary, child, np.inf)
    pos = int(np.argmin(child))
    best = float(child[pos])
    if not parent_val - best > _MIN_GAIN:
        return None
    thr = (v[pos] + v[pos + 1]) / 2.0
    if thr >= v[pos + 1]:
        thr = v[pos]
    return best, float(thr)


def build_tree(X, sample_idx, y, n_classes, max_features, seed):
    """Grow one unpruned Gini tree on the rows ``sample_idx`` of ``X``.

    Returns arrays ``(feature, threshold, left, right, counts, gain)`` where
    leaves carry ``feature == -1`` and ``gain`` is the size-weighted impurity
    decrease ``n*G - nL*GL - nR*GR`` of each split node.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    idx_buf = np.array(sample_idx, dtype=np.intp)
    n_total, d = idx_buf.shape[0], X.shape[1]
    cap = 2 * max(n_total, 1)
    feature = np.full(cap, -1, dtype=np.intp)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.intp)
    right = np.full(cap, -1, dtype=np.intp)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    gain = np.zeros(cap)
    rng = SplitMix64(seed)
    feats = np.arange(d, dtype=np.intp)

    n_nodes = 1
    stack = [(0, 0, n_total)]
    while stack:
        node, start, end = stack.pop()
        idx = idx_buf[start:end]
        n = end - start
        cnt = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        counts[node] = cnt
        if n < 2 or np.count_nonzero(cnt) <= 1:
            continue
        parent_val = n - int((cnt * cnt).sum()) / n

        feats[:] = np.arange(d)
        best_child = np.inf
        best_feat, best_thr = -1, 0.0
        for t in range(d):
            if t >= max_features and best_feat >= 0:
                break
            j = t + rng.next() % (d - t)
            feats[t], feats[j] = feats[j], feats[t]
            f = int(feats[t])
            found = _best_split(X, idx, y, n_classes, f, parent_val)
            if found is not None and found[0] < best_child:
                best_child, best_thr = found
                best_feat = f
        if best_feat < 0:
            continue

        go_left = X[idx, best_feat] <= best_thr
        n_left = int(go_left.sum())
        idx_buf[start:end] = np.concatenate([idx[go_left], idx[~go_left]])
        feature[node] = best_feat
        threshold[node] = best_thr
        gain[node] = parent_val - best_child
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack.append((right[node], start + n_left, end))
        stack.append((left[node], start, start + n_left))

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            counts[:n_nodes].copy(), gain[:n_nodes].copy())


def apply_tree(X, feature, threshold, left, right):
    """Leaf index reached by each row of ``X``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.intp)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node
