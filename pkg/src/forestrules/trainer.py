"""Minimal bagged decision-tree trainer.

Produces schema-conformant forests so the rest of the toolchain runs with
no external ML dependency.  Each tree is grown greedily by maximum
information gain over a random feature subset per node, on a bootstrap
sample of the training rows; accuracy on the rows left out of the sample
is recorded per tree.  Numeric split candidates are midpoints between
consecutive distinct values; nominal splits are one-vs-rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError
from .model import Dataset, DecisionTreeModel, EnsembleModel, TreeNode


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int | None = None
    features_per_split: int | None = None  # default: int(sqrt(n_features))
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 (or None for unlimited)")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    tot = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tot > 0, counts / np.maximum(tot, 1), 0.0)
        lg = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * lg).sum(axis=1)


class _TreeGrower:
    def __init__(self, X, y, space, config: TrainConfig, rng: np.random.Generator):
        self.X = X
        self.y = y
        self.space = space
        self.m = space.n_classes
        self.config = config
        self.rng = rng
        n = space.n_features
        k = config.features_per_split
        if k is None:
            k = max(1, int(math.sqrt(n)))
        if not 1 <= k <= n:
            raise ValueError(f"features_per_split must be in [1, {n}]")
        self.k = k
        self.meta: dict[int, dict] = {}
        self.next_id = 0

    def _alloc(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def _best_numeric(self, f: int, rows: np.ndarray, counts: np.ndarray, h_parent: float):
        v = self.X[rows, f]
        order = np.argsort(v, kind="stable")
        v = v[order]
        labels = self.y[rows][order]
        n = len(rows)
        onehot = labels[:, None] == np.arange(self.m)
        prefix = np.zeros((n + 1, self.m))
        np.cumsum(onehot, axis=0, out=prefix[1:])

        min_leaf = self.config.min_samples_leaf
        cand = np.flatnonzero(v[1:] != v[:-1]) + 1
        cand = cand[(cand >= min_leaf) & (cand <= n - min_leaf)]
        if not len(cand):
            return None
        left = prefix[cand]
        right = counts - left
        frac = cand / n
        gain = h_parent - frac * _entropy_rows(left) - (1 - frac) * _entropy_rows(right)
        best = int(np.argmax(gain))
        if gain[best] <= 0:
            return None
        i = int(cand[best])
        thr = v[i - 1] + (v[i] - v[i - 1]) / 2.0
        if thr <= v[i - 1]:  # adjacent floats: keep the partition exact
            thr = v[i]
        return float(gain[best]), ("numeric", float(thr))

    def _best_nominal(self, f: int, rows: np.ndarray, counts: np.ndarray, h_parent: float):
        vals = self.X[rows, f].astype(np.int64)
        n_cats = len(self.space.features[f].categories)
        cnt = np.zeros((n_cats, self.m))
        np.add.at(cnt, (vals, self.y[rows]), 1)
        sizes = cnt.sum(axis=1)
        n = len(rows)
        min_leaf = self.config.min_samples_leaf
        ok = np.flatnonzero((sizes >= min_leaf) & (n - sizes >= min_leaf))
        if not len(ok):
            return None
        right = cnt[ok]
        left = counts - right
        frac = sizes[ok] / n
        gain = h_parent - frac * _entropy_rows(right) - (1 - frac) * _entropy_rows(left)
        best = int(np.argmax(gain))
        if gain[best] <= 0:
            return None
        return float(gain[best]), ("nominal", int(ok[best]))

    def grow(self, rows: np.ndarray) -> int:
        root = self._alloc()
        stack = [(root, rows, 0)]
        while stack:
            nid, rows, depth = stack.pop()
            counts = np.bincount(self.y[rows], minlength=self.m).astype(np.float64)
            node = {"counts": counts}
            self.meta[nid] = node

            n = len(rows)
            pure = np.count_nonzero(counts) <= 1
            depth_capped = self.config.max_depth is not None and depth >= self.config.max_depth
            if pure or depth_capped or n < 2 * self.config.min_samples_leaf:
                continue

            h_parent = _entropy_rows(counts[None])[0]
            feats = self.rng.choice(self.space.n_features, size=self.k, replace=False)
            best = None
            for f in feats:
                if self.space.features[f].is_numeric:
                    found = self._best_numeric(f, rows, counts, h_parent)
                else:
                    found = self._best_nominal(f, rows, counts, h_parent)
                if found is not None and (best is None or found[0] > best[0]):
                    best = (found[0], int(f), found[1])
            if best is None:
                continue

            _, f, (kind, payload) = best
            if kind == "numeric":
                go_right = self.X[rows, f] >= payload
                node["threshold"] = payload
            else:
                go_right = self.X[rows, f].astype(np.int64) == payload
                node["categories"] = frozenset([payload])
            node["feature"] = f
            left_id, right_id = self._alloc(), self._alloc()
            node["left"], node["right"] = left_id, right_id
            stack.append((right_id, rows[go_right], depth + 1))
            stack.append((left_id, rows[~go_right], depth + 1))
        return root

    def freeze(self, root: int, oob_accuracy: float | None) -> DecisionTreeModel:
        nodes = {}
        for nid, d in self.meta.items():
            nodes[nid] = TreeNode(
                nid,
                d["counts"],
                feature=d.get("feature"),
                threshold=d.get("threshold"),
                categories=d.get("categories"),
                left=d.get("left"),
                right=d.get("right"),
            )
        return DecisionTreeModel(nodes, root=root, weight=1.0, oob_accuracy=oob_accuracy)


def train_forest(data: Dataset, config: TrainConfig) -> EnsembleModel:
    if data.labels is None:
        raise DataError("training needs a labeled dataset")
    if data.n_rows < 2:
        raise DataError("training needs at least 2 rows")
    if len(np.unique(data.labels)) < 2:
        raise DataError("training needs at least 2 observed classes")

    n = data.n_rows
    trees = []
    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    for ss in streams:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        grower = _TreeGrower(data.X, data.labels, data.space, config, rng)
        root = grower.grow(boot)

        oob = np.setdiff1d(np.arange(n), boot)
        tree = grower.freeze(root, None)
        if len(oob):
            solo = EnsembleModel(data.space, (tree,))
            pred = kernels.forest_classes(kernels.pack_forest(solo), data.X[oob])
            acc = float(np.mean(pred == data.labels[oob]))
            tree = DecisionTreeModel(tree.nodes, tree.root, tree.weight, acc)
        trees.append(tree)
    return EnsembleModel(data.space, tuple(trees))


def split_dataset(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint, seed-reproducible train/test partition."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = data.n_rows
    n_test = min(max(int(round(n * test_fraction)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return data.subset(train_idx), data.subset(test_idx)
