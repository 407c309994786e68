"""Pure-numpy implementations of the hot kernels.

Fallback backend used when the compiled extension is unavailable (or when
``FORESTRULES_PURE`` is set).  Must stay result-identical to
``_speedups``: the test suite compares both backends bit for bit.

Atom layout shared by all functions: rules are flattened into parallel
arrays sorted by (rule, feature); ``offsets`` has length n_rules + 1 and
delimits each rule's atoms.  ``kind`` is 0 for a numeric interval
``lo <= v < hi`` and 1 for a nominal bitmask over category indices.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_ONE = np.uint64(1)


def merge_sorted_atoms(offsets, feat, kind, lo, hi, mask, keep):
    """Fold kept atoms into one conjunct per (rule, feature).

    Returns the merged parallel arrays plus the id of the first rule whose
    merged region is empty (-1 when none are).
    """
    n_rules = len(offsets) - 1
    idx = np.flatnonzero(keep)
    if len(idx) == 0:
        out_offsets = np.zeros(n_rules + 1, dtype=np.int64)
        return (out_offsets, feat[:0], kind[:0], lo[:0], hi[:0], mask[:0], -1)

    rule_of = np.repeat(np.arange(n_rules, dtype=np.int64), np.diff(offsets))
    r = rule_of[idx]
    f = feat[idx].astype(np.int64)
    key = r * (int(f.max()) + 1) + f
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])

    out_feat = feat[idx][starts]
    out_kind = kind[idx][starts]
    out_lo = np.maximum.reduceat(lo[idx], starts)
    out_hi = np.minimum.reduceat(hi[idx], starts)
    out_mask = np.bitwise_and.reduceat(mask[idx], starts)
    boundary_rule = r[starts]
    out_offsets = np.searchsorted(boundary_rule, np.arange(n_rules + 1), side="left").astype(np.int64)

    bad = -1
    empty = np.flatnonzero(
        ((out_kind == 0) & (out_lo >= out_hi)) | ((out_kind == 1) & (out_mask == 0))
    )
    if len(empty):
        bad = int(boundary_rule[empty[0]])
    return out_offsets, out_feat, out_kind, out_lo, out_hi, out_mask, bad


def _atom_sat_chunk(feat, kind, lo, hi, mask, Xc):
    """Per-atom satisfaction for a chunk of rows -> bool (n_atoms, chunk)."""
    vals = Xc[:, feat]
    sat = (vals >= lo) & (vals < hi)
    nominal = kind == 1
    if nominal.any():
        iv = vals[:, nominal].astype(np.int64).astype(np.uint64)
        sat[:, nominal] = ((mask[nominal] >> iv) & _ONE).astype(bool)
    return sat.T


def _rule_sat_chunk(offsets, feat, kind, lo, hi, mask, Xc):
    n_rules = len(offsets) - 1
    n_atoms = len(feat)
    if n_atoms == 0:
        return np.ones((n_rules, Xc.shape[0]), dtype=bool)
    sat_atoms = _atom_sat_chunk(feat, kind, lo, hi, mask, Xc)
    starts = np.minimum(offsets[:-1], n_atoms - 1)
    sat = np.logical_and.reduceat(sat_atoms, starts, axis=0)
    # reduceat yields a garbage single element for empty segments
    empty = offsets[:-1] == offsets[1:]
    if empty.any():
        sat[empty] = True
    return sat


def _chunk_size(n_atoms):
    return max(1, int(4_000_000 // max(n_atoms, 1)))


def rule_scores(offsets, feat, kind, lo, hi, mask, X, contrib):
    """Sum each satisfied rule's contribution row per instance.

    Returns (scores (n_rows, m), n_satisfied (n_rows,)).
    """
    n_rows = X.shape[0]
    scores = np.zeros((n_rows, contrib.shape[1]), dtype=np.float64)
    nsat = np.zeros(n_rows, dtype=np.int64)
    step = _chunk_size(len(feat))
    for s in range(0, n_rows, step):
        sat = _rule_sat_chunk(offsets, feat, kind, lo, hi, mask, X[s:s + step])
        scores[s:s + step] = sat.T.astype(np.float64) @ contrib
        nsat[s:s + step] = sat.sum(axis=0)
    return scores, nsat


def rule_sat(offsets, feat, kind, lo, hi, mask, X):
    """Full satisfaction matrix, uint8 (n_rules, n_rows)."""
    n_rows = X.shape[0]
    n_rules = len(offsets) - 1
    out = np.empty((n_rules, n_rows), dtype=np.uint8)
    step = _chunk_size(len(feat))
    for s in range(0, n_rows, step):
        out[:, s:s + step] = _rule_sat_chunk(offsets, feat, kind, lo, hi, mask, X[s:s + step])
    return out


def forest_votes(node_kind, node_feat, node_thr, node_mask, node_left, node_right,
                 leaf_votes, roots, X):
    """Aggregate weighted leaf votes over all trees for every row.

    ``node_kind``: 0 numeric split, 1 nominal split, 2 leaf.  Child ids are
    absolute indices into the flat node arrays; ``leaf_votes`` rows are
    already scaled by the owning tree's weight.
    """
    n_rows = X.shape[0]
    out = np.zeros((n_rows, leaf_votes.shape[1]), dtype=np.float64)
    for root in roots:
        pos = np.full(n_rows, root, dtype=np.int64)
        active = np.flatnonzero(node_kind[pos] != 2)
        while len(active):
            p = pos[active]
            v = X[active, node_feat[p]]
            right = np.empty(len(p), dtype=bool)
            numeric = node_kind[p] == 0
            right[numeric] = v[numeric] >= node_thr[p[numeric]]
            nominal = ~numeric
            if nominal.any():
                iv = v[nominal].astype(np.int64).astype(np.uint64)
                right[nominal] = ((node_mask[p[nominal]] >> iv) & _ONE).astype(bool)
            pos[active] = np.where(right, node_right[p], node_left[p])
            active = active[node_kind[pos[active]] != 2]
        out += leaf_votes[pos]
    return out
