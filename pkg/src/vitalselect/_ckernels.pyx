# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: entropy template matching and Gini tree growth.

Semantics match ``_pykernels`` exactly; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()

cdef double MIN_GAIN = 1e-10


cdef inline void _swap(double* v, Py_ssize_t* c, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double tv = v[i]
    cdef Py_ssize_t tc = c[i]
    v[i] = v[j]
    c[i] = c[j]
    v[j] = tv
    c[j] = tc


cdef void _sort_pairs(double* v, Py_ssize_t* c, Py_ssize_t n) noexcept nogil:
    # 3-way quicksort on values, carrying class codes; order among equal
    # values is irrelevant to the split scan
    cdef Py_ssize_t lo, hi, lt, gt, i, j, mid
    cdef double pivot, tv
    cdef Py_ssize_t tc
    while n > 16:
        mid = n // 2
        if v[mid] < v[0]:
            _swap(v, c, mid, 0)
        if v[n - 1] < v[0]:
            _swap(v, c, n - 1, 0)
        if v[n - 1] < v[mid]:
            _swap(v, c, n - 1, mid)
        pivot = v[mid]
        lt = 0
        gt = n - 1
        i = 0
        while i <= gt:
            if v[i] < pivot:
                _swap(v, c, lt, i)
                lt += 1
                i += 1
            elif v[i] > pivot:
                _swap(v, c, i, gt)
                gt -= 1
            else:
                i += 1
        # recurse into the smaller side, loop on the larger
        if lt < n - 1 - gt:
            _sort_pairs(v, c, lt)
            v = v + gt + 1
            c = c + gt + 1
            n = n - 1 - gt
        else:
            _sort_pairs(v + gt + 1, c + gt + 1, n - 1 - gt)
            n = lt
    for i in range(1, n):
        tv = v[i]
        tc = c[i]
        j = i - 1
        while j >= 0 and v[j] > tv:
            v[j + 1] = v[j]
            c[j + 1] = c[j]
            j -= 1
        v[j + 1] = tv
        c[j + 1] = tc


cdef inline uint64_t _splitmix_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


def template_counts(x, int m, double r):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nt = n - m + 1
    cdef Py_ssize_t nt1 = n - m
    cm_arr = np.zeros(nt, dtype=np.int64)
    cm1_arr = np.zeros(max(nt1, 0), dtype=np.int64)
    cdef int64_t[::1] cm = cm_arr
    cdef int64_t[::1] cm1 = cm1_arr
    cdef int64_t b = 0, a = 0
    cdef Py_ssize_t i, j, k
    cdef bint ok

    with nogil:
        for i in range(nt):
            for j in range(i, nt):
                ok = True
                for k in range(m):
                    if fabs(xv[i + k] - xv[j + k]) > r:
                        ok = False
                        break
                if not ok:
                    continue
                cm[i] += 1
                if j != i:
                    cm[j] += 1
                if i < nt1 and j < nt1:
                    if j != i:
                        b += 2
                    if fabs(xv[i + m] - xv[j + m]) <= r:
                        cm1[i] += 1
                        if j != i:
                            cm1[j] += 1
                            a += 2
    return cm_arr, cm1_arr, int(b), int(a)


cdef struct TreeBuf:
    Py_ssize_t* feature
    double* threshold
    Py_ssize_t* left
    Py_ssize_t* right
    int64_t* counts
    double* gain


cdef Py_ssize_t _grow(const double[:, ::1] XT, Py_ssize_t* idx, Py_ssize_t n_total,
                      const Py_ssize_t[::1] y, Py_ssize_t n_classes,
                      Py_ssize_t max_features, uint64_t seed,
                      TreeBuf* out) noexcept nogil:
    cdef Py_ssize_t d = XT.shape[0]
    cdef uint64_t state = seed
    cdef Py_ssize_t* stack = <Py_ssize_t*>malloc(3 * (2 * n_total + 2) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* feats = <Py_ssize_t*>malloc((d + 1) * sizeof(Py_ssize_t))
    cdef double* pv = <double*>malloc((n_total + 1) * sizeof(double))
    cdef Py_ssize_t* pc = <Py_ssize_t*>malloc((n_total + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* tmp = <Py_ssize_t*>malloc((n_total + 1) * sizeof(Py_ssize_t))
    cdef int64_t* cl = <int64_t*>malloc((n_classes + 1) * sizeof(int64_t))
    cdef int64_t* cr = <int64_t*>malloc((n_classes + 1) * sizeof(int64_t))
    cdef Py_ssize_t sp = 0, n_nodes = 1
    cdef Py_ssize_t node, start, end, n, i, t, jj, f, c, swap, nl_count, w
    cdef int64_t* cnt
    cdef int64_t sq, sql, sqr, nl, nr, n_nonzero
    cdef double parent_val, child, best_child, best_thr, feat_child, feat_thr, thr
    cdef Py_ssize_t best_feat, feat_pos

    stack[0] = 0
    stack[1] = 0
    stack[2] = n_total
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[3 * sp]
        start = stack[3 * sp + 1]
        end = stack[3 * sp + 2]
        n = end - start
        cnt = out.counts + node * n_classes
        memset(cnt, 0, n_classes * sizeof(int64_t))
        for i in range(start, end):
            cnt[y[idx[i]]] += 1
        n_nonzero = 0
        sq = 0
        for c in range(n_classes):
            if cnt[c] > 0:
                n_nonzero += 1
            sq += cnt[c] * cnt[c]
        if n < 2 or n_nonzero <= 1:
            continue
        parent_val = <double>n - <double>sq / <double>n

        for i in range(d):
            feats[i] = i
        best_child = INFINITY
        best_feat = -1
        best_thr = 0.0
        for t in range(d):
            if t >= max_features and best_feat >= 0:
                break
            jj = t + <Py_ssize_t>(_splitmix_next(&state) % <uint64_t>(d - t))
            swap = feats[t]
            feats[t] = feats[jj]
            feats[jj] = swap
            f = feats[t]

            for i in range(n):
                pv[i] = XT[f, idx[start + i]]
                pc[i] = y[idx[start + i]]
            _sort_pairs(pv, pc, n)
            if not (pv[0] < pv[n - 1]):
                continue
            for c in range(n_classes):
                cl[c] = 0
                cr[c] = cnt[c]
            sql = 0
            sqr = sq
            feat_child = INFINITY
            feat_pos = -1
            for i in range(n - 1):
                c = pc[i]
                sql += 2 * cl[c] + 1
                cl[c] += 1
                sqr -= 2 * cr[c] - 1
                cr[c] -= 1
                if pv[i] < pv[i + 1]:
                    nl = i + 1
                    nr = n - nl
                    child = (<double>nl - <double>sql / <double>nl) + (<double>nr - <double>sqr / <double>nr)
                    if child < feat_child:
                        feat_child = child
                        feat_pos = i
            if feat_pos < 0 or not (parent_val - feat_child > MIN_GAIN):
                continue
            if feat_child < best_child:
                best_child = feat_child
                best_feat = f
                thr = (pv[feat_pos] + pv[feat_pos + 1]) / 2.0
                if thr >= pv[feat_pos + 1]:
                    thr = pv[feat_pos]
                best_thr = thr
        if best_feat < 0:
            continue

        # stable partition of idx[start:end]
        nl_count = 0
        w = 0
        for i in range(start, end):
            if XT[best_feat, idx[i]] <= best_thr:
                idx[start + nl_count] = idx[i]
                nl_count += 1
            else:
                tmp[w] = idx[i]
                w += 1
        for i in range(w):
            idx[start + nl_count + i] = tmp[i]

        out.feature[node] = best_feat
        out.threshold[node] = best_thr
        out.gain[node] = parent_val - best_child
        out.left[node] = n_nodes
        out.right[node] = n_nodes + 1
        n_nodes += 2
        stack[3 * sp] = out.right[node]
        stack[3 * sp + 1] = start + nl_count
        stack[3 * sp + 2] = end
        sp += 1
        stack[3 * sp] = out.left[node]
        stack[3 * sp + 1] = start
        stack[3 * sp + 2] = start + nl_count
        sp += 1

    free(stack)
    free(feats)
    free(pv)
    free(pc)
    free(tmp)
    free(cl)
    free(cr)
    return n_nodes


def build_tree(X, sample_idx, y, Py_ssize_t n_classes, Py_ssize_t max_features, seed):
    # feature-major copy keeps per-feature gathers inside one column
    cdef const double[:, ::1] XT = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
    cdef const Py_ssize_t[::1] yv = np.ascontiguousarray(y, dtype=np.intp)
    idx_arr = np.array(sample_idx, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef Py_ssize_t n_total = idx.shape[0]
    cdef Py_ssize_t cap = 2 * max(n_total, 1)
    feature = np.full(cap, -1, dtype=np.intp)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.intp)
    right = np.full(cap, -1, dtype=np.intp)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    gain = np.zeros(cap)
    cdef Py_ssize_t[::1] fv = feature
    cdef double[::1] tv = threshold
    cdef Py_ssize_t[::1] lv = left
    cdef Py_ssize_t[::1] rv = right
    cdef int64_t[:, ::1] cv = counts
    cdef double[::1] gv = gain
    cdef TreeBuf out
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n_nodes
    if n_total == 0:
        return (feature[:1], threshold[:1], left[:1], right[:1], counts[:1], gain[:1])
    out.feature = &fv[0]
    out.threshold = &tv[0]
    out.left = &lv[0]
    out.right = &rv[0]
    out.counts = &cv[0, 0]
    out.gain = &gv[0]
    with nogil:
        n_nodes = _grow(XT, &idx[0], n_total, yv, n_classes, max_features, s, &out)
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            counts[:n_nodes].copy(), gain[:n_nodes].copy())


def apply_tree(X, feature, threshold, left, right):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const Py_ssize_t[::1] fv = np.ascontiguousarray(feature, dtype=np.intp)
    cdef const double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const Py_ssize_t[::1] lv = np.ascontiguousarray(left, dtype=np.intp)
    cdef const Py_ssize_t[::1] rv = np.ascontiguousarray(right, dtype=np.intp)
    out_arr = np.zeros(Xv.shape[0], dtype=np.intp)
    cdef Py_ssize_t[::1] out = out_arr
    cdef Py_ssize_t i, node
    with nogil:
        for i in range(Xv.shape[0]):
            node = 0
            while fv[node] >= 0:
                if Xv[i, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            out[i] = node
    return out_arr
