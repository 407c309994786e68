"""Backend selection and array packing for the evaluation hot paths.

Two interchangeable backends implement the kernels: a Cython extension
(``_speedups``) and a numpy fallback (``_kernels_py``).  The compiled one
is preferred when importable; set ``FORESTRULES_PURE=1`` to force the
fallback.  ``python benchmarks/bench_kernels.py`` compares the two.

Batch kernels encode nominal category sets as 64-bit masks, so nominal
features are limited to 64 categories on these paths (the scalar
predicates in ``rules`` have no such limit).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

if os.environ.get("FORESTRULES_PURE"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND

MAX_MASK_CATEGORIES = 64

_FULL_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)

_KIND_NUMERIC = 0
_KIND_NOMINAL = 1
_KIND_LEAF = 2


def category_mask(indices) -> np.uint64:
    m = 0
    for i in indices:
        if not 0 <= i < MAX_MASK_CATEGORIES:
            raise ValueError(
                f"category index {i} outside the {MAX_MASK_CATEGORIES}-bit mask supported by batch kernels"
            )
        m |= 1 << i
    return np.uint64(m)


@dataclass(frozen=True)
class RulePack:
    """Flat atom arrays for a list of rules, sorted by (rule, feature)."""

    offsets: np.ndarray
    feat: np.ndarray
    kind: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    mask: np.ndarray

    @property
    def n_rules(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_atoms(self) -> int:
        return len(self.feat)

    def rule_slice(self, r: int) -> slice:
        return slice(int(self.offsets[r]), int(self.offsets[r + 1]))


def _conjunct_fields(c):
    if c.categories is None:
        return _KIND_NUMERIC, c.lo, c.hi, _FULL_MASK
    return _KIND_NOMINAL, -np.inf, np.inf, category_mask(c.categories)


def pack_conjunct_rows(conjunct_rows) -> RulePack:
    """Pack one conjunct list per rule; atoms are stably sorted by feature."""
    offsets = [0]
    feat, kind, lo, hi, mask = [], [], [], [], []
    for row in conjunct_rows:
        for c in sorted(row, key=lambda c: c.feature):
            k, l, h, mk = _conjunct_fields(c)
            feat.append(c.feature)
            kind.append(k)
            lo.append(l)
            hi.append(h)
            mask.append(mk)
        offsets.append(len(feat))
    return RulePack(
        offsets=np.asarray(offsets, dtype=np.int64),
        feat=np.asarray(feat, dtype=np.int32),
        kind=np.asarray(kind, dtype=np.uint8),
        lo=np.asarray(lo, dtype=np.float64),
        hi=np.asarray(hi, dtype=np.float64),
        mask=np.asarray(mask, dtype=np.uint64),
    )


def merge_pack(pack: RulePack, keep: np.ndarray) -> tuple[RulePack, int]:
    """Merge kept atoms per (rule, feature); returns the pack and the first
    contradictory rule id (-1 when every merged region is non-empty)."""
    keep = np.ascontiguousarray(keep, dtype=np.uint8)
    out = _impl.merge_sorted_atoms(
        pack.offsets, pack.feat, pack.kind, pack.lo, pack.hi, pack.mask, keep
    )
    merged = RulePack(*out[:6])
    return merged, out[6]


def take_rules(pack: RulePack, indices: np.ndarray) -> RulePack:
    """Gather a sub-pack holding the given rules, in the given order."""
    indices = np.asarray(indices, dtype=np.int64)
    lens = pack.offsets[indices + 1] - pack.offsets[indices]
    out_offsets = np.zeros(len(indices) + 1, dtype=np.int64)
    np.cumsum(lens, out=out_offsets[1:])
    total = int(out_offsets[-1])
    pos = (
        np.repeat(pack.offsets[indices], lens)
        + np.arange(total, dtype=np.int64)
        - np.repeat(out_offsets[:-1], lens)
    )
    return RulePack(
        offsets=out_offsets,
        feat=pack.feat[pos],
        kind=pack.kind[pos],
        lo=pack.lo[pos],
        hi=pack.hi[pos],
        mask=pack.mask[pos],
    )


def rule_scores(pack: RulePack, X: np.ndarray, contrib: np.ndarray):
    X = np.ascontiguousarray(X, dtype=np.float64)
    contrib = np.ascontiguousarray(contrib, dtype=np.float64)
    return _impl.rule_scores(
        pack.offsets, pack.feat, pack.kind, pack.lo, pack.hi, pack.mask, X, contrib
    )


def rule_sat(pack: RulePack, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _impl.rule_sat(pack.offsets, pack.feat, pack.kind, pack.lo, pack.hi, pack.mask, X)


@dataclass(frozen=True)
class ForestPack:
    """All trees of an ensemble flattened into shared node arrays.

    ``leaf_votes`` rows are pre-scaled by the owning tree's weight, so a
    traversal only adds the reached row.
    """

    node_kind: np.ndarray
    node_feat: np.ndarray
    node_thr: np.ndarray
    node_mask: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    leaf_votes: np.ndarray
    roots: np.ndarray


def pack_forest(model) -> ForestPack:
    n_nodes = sum(len(t.nodes) for t in model.trees)
    m = model.space.n_classes
    node_kind = np.empty(n_nodes, dtype=np.uint8)
    node_feat = np.zeros(n_nodes, dtype=np.int32)
    node_thr = np.zeros(n_nodes, dtype=np.float64)
    node_mask = np.zeros(n_nodes, dtype=np.uint64)
    node_left = np.zeros(n_nodes, dtype=np.int32)
    node_right = np.zeros(n_nodes, dtype=np.int32)
    leaf_votes = np.zeros((n_nodes, m), dtype=np.float64)
    roots = np.empty(len(model.trees), dtype=np.int64)

    base = 0
    for t, tree in enumerate(model.trees):
        ids = sorted(tree.nodes)
        flat = {nid: base + i for i, nid in enumerate(ids)}
        roots[t] = flat[tree.root]
        for nid in ids:
            node = tree.nodes[nid]
            i = flat[nid]
            if node.is_leaf:
                node_kind[i] = _KIND_LEAF
                leaf_votes[i] = tree.weight * node.counts
                continue
            node_feat[i] = node.feature
            node_left[i] = flat[node.left]
            node_right[i] = flat[node.right]
            if node.threshold is not None:
                node_kind[i] = _KIND_NUMERIC
                node_thr[i] = node.threshold
            else:
                node_kind[i] = _KIND_NOMINAL
                node_mask[i] = category_mask(node.categories)
        base += len(ids)
    return ForestPack(node_kind, node_feat, node_thr, node_mask,
                      node_left, node_right, leaf_votes, roots)


def forest_votes(pack: ForestPack, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _impl.forest_votes(
        pack.node_kind, pack.node_feat, pack.node_thr, pack.node_mask,
        pack.node_left, pack.node_right, pack.leaf_votes, pack.roots, X,
    )


def forest_classes(pack: ForestPack, X: np.ndarray) -> np.ndarray:
    return np.argmax(forest_votes(pack, X), axis=1)
