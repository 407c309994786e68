"""Portable representation of datasets and tree-ensemble classifiers.

A model is a weighted set of binary decision trees over a declared feature
space.  Internal nodes test a single feature: numeric nodes hold a threshold
with the convention ``value >= threshold goes right``; nominal nodes hold a
category set with ``value in set goes right``.  Every node stores per-class
instance counts, so split quality is computable without the training data.

The on-disk formats are a versioned JSON schema for models and RFC-4180 CSV
for datasets; see ``load_model`` / ``load_dataset``.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, ModelFormatError, ModelValidationError

NUMERIC = "numeric"
NOMINAL = "nominal"

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FeatureDecl:
    """Declaration of a single input feature."""

    name: str
    kind: str = NUMERIC
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise ModelValidationError("feature name must be non-empty")
        if self.kind not in (NUMERIC, NOMINAL):
            raise ModelValidationError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC and self.categories is not None:
            raise ModelValidationError(f"feature {self.name!r}: numeric feature declares categories")
        if self.kind == NOMINAL:
            if not self.categories:
                raise ModelValidationError(f"feature {self.name!r}: nominal feature needs a non-empty category set")
            if len(set(self.categories)) != len(self.categories):
                raise ModelValidationError(f"feature {self.name!r}: duplicate categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered feature declarations plus the ordered class names."""

    features: tuple[FeatureDecl, ...]
    classes: tuple[str, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ModelValidationError("feature names must be unique")
        if len(self.classes) < 2:
            raise ModelValidationError("need at least two classes")
        if len(set(self.classes)) != len(self.classes):
            raise ModelValidationError("class names must be unique")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def feature_index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def category_index(self, feature: int, value: str) -> int:
        cats = self.features[feature].categories
        try:
            return cats.index(value)
        except ValueError:
            raise KeyError(value) from None


@dataclass(frozen=True)
class Dataset:
    """Typed rows over a feature space.

    Values are stored as a dense float matrix; nominal features hold the
    index of the category in its declaration.  ``labels`` is None for
    unlabeled data.
    """

    space: FeatureSpace
    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        object.__setattr__(self, "X", X)
        if X.ndim != 2 or X.shape[1] != self.space.n_features:
            raise DataError(
                f"data matrix has shape {X.shape}, expected (*, {self.space.n_features})"
            )
        if self.labels is not None:
            y = np.ascontiguousarray(self.labels, dtype=np.int64)
            object.__setattr__(self, "labels", y)
            if y.shape != (X.shape[0],):
                raise DataError("label vector length does not match row count")
            if len(y) and (y.min() < 0 or y.max() >= self.space.n_classes):
                raise DataError("label index out of range")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def subset(self, idx: np.ndarray) -> "Dataset":
        y = self.labels[idx] if self.labels is not None else None
        return Dataset(self.space, self.X[idx], y)


@dataclass(frozen=True)
class TreeNode:
    """One node of a decision tree.

    Internal nodes carry either a numeric ``threshold`` (value >= threshold
    goes right) or a nominal ``categories`` index set (membership goes
    right), plus both child ids.  Leaves carry only ``counts``.
    """

    node_id: int
    counts: np.ndarray
    feature: int | None = None
    threshold: float | None = None
    categories: frozenset[int] | None = None
    left: int | None = None
    right: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.float64))

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class DecisionTreeModel:
    nodes: dict[int, TreeNode]
    root: int
    weight: float = 1.0
    oob_accuracy: float | None = None

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        node = self.nodes[self.root]
        while not node.is_leaf:
            v = x[node.feature]
            if node.threshold is not None:
                go_right = v >= node.threshold
            else:
                go_right = int(v) in node.categories
            node = self.nodes[node.right if go_right else node.left]
        return node

    def leaf_ids(self) -> list[int]:
        return sorted(i for i, n in self.nodes.items() if n.is_leaf)


@dataclass(frozen=True)
class EnsembleModel:
    space: FeatureSpace
    trees: tuple[DecisionTreeModel, ...]

    def __post_init__(self):
        if not self.trees:
            raise ModelValidationError("ensemble needs at least one tree")


def predict_ensemble(model: EnsembleModel, x: Sequence[float]) -> tuple[np.ndarray, int]:
    """Weighted vote sum over all trees; ties break to the lowest class index."""
    x = np.asarray(x, dtype=np.float64)
    votes = np.zeros(model.space.n_classes)
    for tree in model.trees:
        votes += tree.weight * tree.leaf_for(x).counts
    return votes, int(np.argmax(votes))


# ---------------------------------------------------------------------------
# validation

def _validate_tree(tree_idx: int, tree: DecisionTreeModel, space: FeatureSpace) -> None:
    m = space.n_classes
    if tree.weight < 0:
        raise ModelValidationError(f"tree {tree_idx}: negative weight")
    if tree.oob_accuracy is not None and not (0.0 <= tree.oob_accuracy <= 1.0):
        raise ModelValidationError(f"tree {tree_idx}: oob_accuracy outside [0, 1]")
    if tree.root not in tree.nodes:
        raise ModelValidationError(f"tree {tree_idx}: root id {tree.root} not among nodes")

    seen: set[int] = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise ModelValidationError(f"tree {tree_idx}: node {nid} reached twice (not a tree)")
        seen.add(nid)
        node = tree.nodes.get(nid)
        if node is None:
            raise ModelValidationError(f"tree {tree_idx}: missing node id {nid}")
        if node.counts.shape != (m,):
            raise ModelValidationError(f"tree {tree_idx}: node {nid} counts length != class count")
        if np.any(node.counts < 0):
            raise ModelValidationError(f"tree {tree_idx}: node {nid} has negative class counts")
        if node.is_leaf:
            continue
        if not (0 <= node.feature < space.n_features):
            raise ModelValidationError(f"tree {tree_idx}: node {nid} references unknown feature")
        decl = space.features[node.feature]
        if decl.is_numeric:
            if node.threshold is None or node.categories is not None:
                raise ModelValidationError(f"tree {tree_idx}: node {nid} numeric split needs a threshold")
        else:
            if node.categories is None or node.threshold is not None:
                raise ModelValidationError(f"tree {tree_idx}: node {nid} nominal split needs a category set")
            n_cat = len(decl.categories)
            if not node.categories or any(not (0 <= c < n_cat) for c in node.categories):
                raise ModelValidationError(f"tree {tree_idx}: node {nid} category set invalid")
        if node.left is None or node.right is None:
            raise ModelValidationError(f"tree {tree_idx}: node {nid} internal node missing a child")
        left, right = tree.nodes.get(node.left), tree.nodes.get(node.right)
        if left is None or right is None:
            raise ModelValidationError(f"tree {tree_idx}: node {nid} child id not among nodes")
        if not np.array_equal(node.counts, left.counts + right.counts):
            raise ModelValidationError(
                f"tree {tree_idx}: node {nid} counts do not equal the sum of its children"
            )
        stack.append(node.left)
        stack.append(node.right)

    if seen != set(tree.nodes):
        orphan = sorted(set(tree.nodes) - seen)[0]
        raise ModelValidationError(f"tree {tree_idx}: node {orphan} unreachable from root")


def validate_model(model: EnsembleModel) -> None:
    for i, tree in enumerate(model.trees):
        _validate_tree(i, tree, model.space)


# ---------------------------------------------------------------------------
# JSON codec

def _space_to_dict(space: FeatureSpace) -> dict:
    feats = []
    for f in space.features:
        d = {"name": f.name, "kind": f.kind}
        if f.categories is not None:
            d["categories"] = list(f.categories)
        feats.append(d)
    return {"features": feats, "classes": list(space.classes)}


def _space_from_dict(doc: dict) -> FeatureSpace:
    feats = []
    for d in doc["features"]:
        cats = d.get("categories")
        feats.append(FeatureDecl(d["name"], d.get("kind", NUMERIC), tuple(cats) if cats else None))
    return FeatureSpace(tuple(feats), tuple(doc["classes"]))


def model_to_dict(model: EnsembleModel) -> dict:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_space_to_dict(model.space))
    trees = []
    for tree in model.trees:
        nodes = []
        for nid in sorted(tree.nodes):
            node = tree.nodes[nid]
            nd = {"id": nid, "kind": "leaf" if node.is_leaf else "internal"}
            if not node.is_leaf:
                nd["feature"] = node.feature
                if node.threshold is not None:
                    nd["threshold"] = node.threshold
                else:
                    cats = model.space.features[node.feature].categories
                    nd["categories"] = [cats[i] for i in sorted(node.categories)]
                nd["left"] = node.left
                nd["right"] = node.right
            nd["counts"] = [int(c) if float(c).is_integer() else float(c) for c in node.counts]
            nodes.append(nd)
        td = {"weight": tree.weight, "nodes": nodes, "root": tree.root}
        if tree.oob_accuracy is not None:
            td["oob_accuracy"] = tree.oob_accuracy
        trees.append(td)
    doc["trees"] = trees
    return doc


def model_digest(model: EnsembleModel) -> str:
    """Stable content hash, used to tie explanations to their source model."""
    blob = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_model(model: EnsembleModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def model_from_dict(doc: dict) -> EnsembleModel:
    try:
        version = doc["schema_version"]
        if version != SCHEMA_VERSION:
            raise ModelFormatError(f"unsupported schema_version {version}")
        space = _space_from_dict(doc)
        trees = []
        for td in doc["trees"]:
            nodes: dict[int, TreeNode] = {}
            for nd in td["nodes"]:
                nid = int(nd["id"])
                if nid in nodes:
                    raise ModelValidationError(f"duplicate node id {nid}")
                counts = np.asarray(nd["counts"], dtype=np.float64)
                if nd["kind"] == "leaf":
                    nodes[nid] = TreeNode(nid, counts)
                elif nd["kind"] == "internal":
                    feature = int(nd["feature"])
                    cats = None
                    threshold = None
                    if "threshold" in nd:
                        threshold = float(nd["threshold"])
                    elif "categories" in nd:
                        if not (0 <= feature < space.n_features) or space.features[feature].categories is None:
                            raise ModelValidationError(f"node {nid}: category split on non-nominal feature")
                        decl = space.features[feature]
                        try:
                            cats = frozenset(decl.categories.index(c) for c in nd["categories"])
                        except ValueError as exc:
                            raise ModelValidationError(f"node {nid}: unknown category in split: {exc}")
                    else:
                        raise ModelFormatError(f"node {nid}: internal node lacks threshold/categories")
                    nodes[nid] = TreeNode(
                        nid, counts, feature=feature, threshold=threshold, categories=cats,
                        left=int(nd["left"]), right=int(nd["right"]),
                    )
                else:
                    raise ModelFormatError(f"node {nid}: unknown kind {nd['kind']!r}")
            oob = td.get("oob_accuracy")
            trees.append(
                DecisionTreeModel(
                    nodes, root=int(td["root"]), weight=float(td["weight"]),
                    oob_accuracy=float(oob) if oob is not None else None,
                )
            )
        model = EnsembleModel(space, tuple(trees))
    except (ModelFormatError, ModelValidationError):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    validate_model(model)
    return model


def load_model(path) -> EnsembleModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# CSV codec

def _parse_numeric(token: str, row: int, col: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"row {row}: non-numeric value {token!r} in numeric column {col!r}") from None


def load_dataset(path, space: FeatureSpace, label: str | None = None) -> Dataset:
    """Read an RFC-4180 CSV with a header row into a typed Dataset.

    The header must contain every feature name exactly once; ``label``
    names the class column (omit for unlabeled data).  Columns that are
    neither features nor the label are rejected.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: missing header row") from None

        col_of: dict[str, int] = {}
        for i, name in enumerate(header):
            if name in col_of:
                raise DataError(f"duplicate column {name!r}")
            col_of[name] = i
        feature_names = {f.name for f in space.features}
        for name in header:
            if name not in feature_names and name != label:
                raise DataError(f"unknown column {name!r}")
        for f in space.features:
            if f.name not in col_of:
                raise DataError(f"missing feature column {f.name!r}")
        if label is not None and label not in col_of:
            raise DataError(f"missing label column {label!r}")

        feat_cols = [col_of[f.name] for f in space.features]
        label_col = col_of[label] if label is not None else None

        rows: list[list[float]] = []
        labels: list[int] = []
        for rownum, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise DataError(f"row {rownum}: expected {len(header)} fields, got {len(rec)}")
            vec = []
            for f, c in zip(space.features, feat_cols):
                token = rec[c]
                if f.is_numeric:
                    vec.append(_parse_numeric(token, rownum, f.name))
                else:
                    try:
                        vec.append(float(f.categories.index(token)))
                    except ValueError:
                        raise DataError(
                            f"row {rownum}: value {token!r} not among categories of {f.name!r}"
                        ) from None
            rows.append(vec)
            if label_col is not None:
                token = rec[label_col]
                try:
                    labels.append(space.classes.index(token))
                except ValueError:
                    raise DataError(f"row {rownum}: unknown class label {token!r}") from None

    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), space.n_features)
    y = np.asarray(labels, dtype=np.int64) if label is not None else None
    return Dataset(space, X, y)


def save_dataset(data: Dataset, path, label: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = [f.name for f in data.space.features]
        if label is not None:
            header.append(label)
        writer.writerow(header)
        for i in range(data.n_rows):
            rec = []
            for f, v in zip(data.space.features, data.X[i]):
                if f.is_numeric:
                    rec.append(int(v) if float(v).is_integer() else v)
                else:
                    rec.append(f.categories[int(v)])
            if label is not None:
                rec.append(data.space.classes[int(data.labels[i])])
            writer.writerow(rec)
