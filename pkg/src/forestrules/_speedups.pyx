# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as ``_kernels_py``; selected at import by ``kernels``.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def merge_sorted_atoms(cnp.int64_t[::1] offsets,
                       cnp.int32_t[::1] feat,
                       cnp.uint8_t[::1] kind,
                       cnp.float64_t[::1] lo,
                       cnp.float64_t[::1] hi,
                       cnp.uint64_t[::1] mask,
                       cnp.uint8_t[::1] keep):
    cdef Py_ssize_t n_rules = offsets.shape[0] - 1
    cdef Py_ssize_t n_atoms = feat.shape[0]

    out_offsets_arr = np.zeros(n_rules + 1, dtype=np.int64)
    out_feat_arr = np.empty(n_atoms, dtype=np.int32)
    out_kind_arr = np.empty(n_atoms, dtype=np.uint8)
    out_lo_arr = np.empty(n_atoms, dtype=np.float64)
    out_hi_arr = np.empty(n_atoms, dtype=np.float64)
    out_mask_arr = np.empty(n_atoms, dtype=np.uint64)

    cdef cnp.int64_t[::1] out_offsets = out_offsets_arr
    cdef cnp.int32_t[::1] out_feat = out_feat_arr
    cdef cnp.uint8_t[::1] out_kind = out_kind_arr
    cdef cnp.float64_t[::1] out_lo = out_lo_arr
    cdef cnp.float64_t[::1] out_hi = out_hi_arr
    cdef cnp.uint64_t[::1] out_mask = out_mask_arr

    cdef Py_ssize_t r, a, w = 0
    cdef Py_ssize_t cur = -1          # index of the open output conjunct
    cdef cnp.int32_t cur_feat
    cdef cnp.int64_t bad = -1

    for r in range(n_rules):
        cur = -1
        cur_feat = -1
        for a in range(offsets[r], offsets[r + 1]):
            if not keep[a]:
                continue
            if cur >= 0 and feat[a] == cur_feat:
                if kind[a] == 0:
                    if lo[a] > out_lo[cur]:
                        out_lo[cur] = lo[a]
                    if hi[a] < out_hi[cur]:
                        out_hi[cur] = hi[a]
                else:
                    out_mask[cur] = out_mask[cur] & mask[a]
            else:
                cur = w
                cur_feat = feat[a]
                out_feat[w] = feat[a]
                out_kind[w] = kind[a]
                out_lo[w] = lo[a]
                out_hi[w] = hi[a]
                out_mask[w] = mask[a]
                w += 1
        if bad == -1:
            for a in range(out_offsets[r], w):
                if out_kind[a] == 0:
                    if out_lo[a] >= out_hi[a]:
                        bad = r
                        break
                elif out_mask[a] == 0:
                    bad = r
                    break
        out_offsets[r + 1] = w

    return (out_offsets_arr, out_feat_arr[:w].copy(), out_kind_arr[:w].copy(),
            out_lo_arr[:w].copy(), out_hi_arr[:w].copy(), out_mask_arr[:w].copy(),
            int(bad))


cdef inline bint _rule_holds(Py_ssize_t start, Py_ssize_t end,
                             cnp.int32_t[::1] feat, cnp.uint8_t[::1] kind,
                             cnp.float64_t[::1] lo, cnp.float64_t[::1] hi,
                             cnp.uint64_t[::1] mask,
                             cnp.float64_t[:, ::1] X, Py_ssize_t row) nogil:
    cdef Py_ssize_t a
    cdef double v
    for a in range(start, end):
        v = X[row, feat[a]]
        if kind[a] == 0:
            if v < lo[a] or v >= hi[a]:
                return 0
        else:
            if not (mask[a] >> (<unsigned long long> v)) & 1ULL:
                return 0
    return 1


def rule_scores(cnp.int64_t[::1] offsets,
                cnp.int32_t[::1] feat,
                cnp.uint8_t[::1] kind,
                cnp.float64_t[::1] lo,
                cnp.float64_t[::1] hi,
                cnp.uint64_t[::1] mask,
                cnp.float64_t[:, ::1] X,
                cnp.float64_t[:, ::1] contrib):
    cdef Py_ssize_t n_rules = offsets.shape[0] - 1
    cdef Py_ssize_t n_rows = X.shape[0]
    cdef Py_ssize_t m = contrib.shape[1]

    scores_arr = np.zeros((n_rows, m), dtype=np.float64)
    nsat_arr = np.zeros(n_rows, dtype=np.int64)
    cdef cnp.float64_t[:, ::1] scores = scores_arr
    cdef cnp.int64_t[::1] nsat = nsat_arr

    cdef Py_ssize_t row, r, j
    with nogil:
        for row in range(n_rows):
            for r in range(n_rules):
                if _rule_holds(offsets[r], offsets[r + 1], feat, kind, lo, hi, mask, X, row):
                    nsat[row] += 1
                    for j in range(m):
                        scores[row, j] += contrib[r, j]
    return scores_arr, nsat_arr


def rule_sat(cnp.int64_t[::1] offsets,
             cnp.int32_t[::1] feat,
             cnp.uint8_t[::1] kind,
             cnp.float64_t[::1] lo,
             cnp.float64_t[::1] hi,
             cnp.uint64_t[::1] mask,
             cnp.float64_t[:, ::1] X):
    cdef Py_ssize_t n_rules = offsets.shape[0] - 1
    cdef Py_ssize_t n_rows = X.shape[0]
    out_arr = np.empty((n_rules, n_rows), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t row, r
    with nogil:
        for r in range(n_rules):
            for row in range(n_rows):
                out[r, row] = _rule_holds(offsets[r], offsets[r + 1], feat, kind, lo, hi, mask, X, row)
    return out_arr


def forest_votes(cnp.uint8_t[::1] node_kind,
                 cnp.int32_t[::1] node_feat,
                 cnp.float64_t[::1] node_thr,
                 cnp.uint64_t[::1] node_mask,
                 cnp.int32_t[::1] node_left,
                 cnp.int32_t[::1] node_right,
                 cnp.float64_t[:, ::1] leaf_votes,
                 cnp.int64_t[::1] roots,
                 cnp.float64_t[:, ::1] X):
    cdef Py_ssize_t n_rows = X.shape[0]
    cdef Py_ssize_t m = leaf_votes.shape[1]
    cdef Py_ssize_t n_trees = roots.shape[0]

    out_arr = np.zeros((n_rows, m), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr

    cdef Py_ssize_t row, t, j
    cdef cnp.int64_t p
    cdef double v
    cdef bint go_right
    with nogil:
        for row in range(n_rows):
            for t in range(n_trees):
                p = roots[t]
                while node_kind[p] != 2:
                    v = X[row, node_feat[p]]
                    if node_kind[p] == 0:
                        go_right = v >= node_thr[p]
                    else:
                        go_right = (node_mask[p] >> (<unsigned long long> v)) & 1ULL
                    p = node_right[p] if go_right else node_left[p]
                for j in range(m):
                    out[row, j] += leaf_votes[p, j]
    return out_arr
