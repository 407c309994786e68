"""Convert fitted scikit-learn random forests into the portable JSON schema.

Schema conventions produced here:
  - numeric split: ``value >= threshold`` goes right.  scikit-learn routes
    ``value <= t`` left, so the exported threshold is ``nextafter(t, inf)``,
    which reproduces the strict ``value > t`` right-branch exactly for
    every float input (integer-valued features sit exactly on thresholds,
    so a naive copy would flip them).
  - per-node class counts, with every internal node equal to the sum of
    its children (recomputed bottom-up).
  - tree weight 1.

Two vote encodings:
  - ``normalized`` (default): each leaf's distribution is rescaled to a
    common per-leaf total, so summing votes over trees reproduces
    scikit-learn's probability averaging and the exported model's argmax
    matches ``predict`` on every input (up to shared tie-breaking).
  - ``raw``: each leaf keeps its training sample counts.  This preserves
    leaf support for weight-based post-processing, but vote sums then
    weight big leaves more than ``predict`` does, so per-row agreement is
    high yet not guaranteed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import is_classifier
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

SCHEMA_VERSION = 1

NORMALIZED_LEAF_TOTAL = 1_000_000


class ExportError(ValueError):
    pass


@dataclass
class ExportOptions:
    model: object
    feature_names: Sequence[str]
    class_names: Sequence[str] | None = None
    compute_oob: bool = True
    train_X: np.ndarray | None = None
    train_y: np.ndarray | None = None
    vote_mode: str = "normalized"  # or "raw"
    output_path: str | None = None


def _check_forest(opts: ExportOptions):
    model = opts.model
    if not is_classifier(model):
        raise ExportError("only classification forests can be exported")
    try:
        check_is_fitted(model)
    except NotFittedError as exc:
        raise ExportError("model is not fitted") from exc
    if not hasattr(model, "estimators_"):
        raise ExportError("model has no estimators_; expected a fitted forest")
    n_in = getattr(model, "n_features_in_", None)
    if n_in is not None and len(opts.feature_names) != n_in:
        raise ExportError(
            f"{len(opts.feature_names)} feature names given, model expects {n_in}"
        )
    if opts.vote_mode not in ("normalized", "raw"):
        raise ExportError(f"unknown vote_mode {opts.vote_mode!r}")


def _leaf_fractions(tree) -> np.ndarray:
    """Per-node class fractions, robust to the two tree_.value layouts."""
    value = tree.value[:, 0, :]
    sums = value.sum(axis=1)
    if np.allclose(sums, 1.0):
        return value
    return value / sums[:, None]


def _raw_counts(tree) -> np.ndarray:
    fractions = _leaf_fractions(tree)
    counts = fractions * tree.weighted_n_node_samples[:, None]
    rounded = np.rint(counts)
    if not np.allclose(counts, rounded, atol=1e-6):
        raise ExportError("non-integer node counts; sample-weighted forests are unsupported")
    return rounded.astype(np.int64)


def _bootstrap_oob_accuracy(model, est, n_samples, X, y):
    """Per-tree accuracy on rows missing from its bootstrap sample, when
    scikit-learn exposes the sampling internals; None otherwise.

    ``y`` holds class indices.  Forest sub-estimators are fit on encoded
    labels, so ``est.predict`` already yields (float) indices regardless
    of the model's native class values.
    """
    if not getattr(model, "bootstrap", False):
        return None
    try:
        from sklearn.ensemble._forest import (
            _generate_sample_indices,
            _get_n_samples_bootstrap,
        )

        n_boot = _get_n_samples_bootstrap(n_samples, getattr(model, "max_samples", None))
        picked = _generate_sample_indices(est.random_state, n_samples, n_boot)
    except Exception:
        return None
    oob = np.setdiff1d(np.arange(n_samples), picked)
    if not len(oob):
        return None
    pred = np.asarray(est.predict(X[oob])).astype(np.int64)
    return float(np.mean(pred == np.asarray(y)[oob]))


def _export_tree(est, vote_mode: str) -> dict:
    tree = est.tree_
    left = tree.children_left
    right = tree.children_right
    feature = tree.feature
    threshold = tree.threshold
    is_leaf = left == -1

    if vote_mode == "raw":
        leaf_counts = _raw_counts(tree)
    else:
        fractions = _leaf_fractions(tree)
        leaf_counts = np.rint(fractions * NORMALIZED_LEAF_TOTAL).astype(np.int64)

    # internal counts must equal the sum of their children's
    counts = np.zeros_like(leaf_counts)
    order = np.argsort(tree.compute_node_depths())[::-1]  # deepest first
    for i in order:
        counts[i] = leaf_counts[i] if is_leaf[i] else counts[left[i]] + counts[right[i]]

    nodes = []
    for i in range(tree.node_count):
        if is_leaf[i]:
            nodes.append({"id": int(i), "kind": "leaf", "counts": counts[i].tolist()})
        else:
            nodes.append(
                {
                    "id": int(i),
                    "kind": "internal",
                    "feature": int(feature[i]),
                    # "<= t left" becomes ">= nextafter(t) right", exactly
                    "threshold": float(np.nextafter(threshold[i], np.inf)),
                    "left": int(left[i]),
                    "right": int(right[i]),
                    "counts": counts[i].tolist(),
                }
            )
    return {"weight": 1.0, "nodes": nodes, "root": 0}


def export_model(opts: ExportOptions) -> dict:
    """Build (and optionally write) the schema document for a fitted forest."""
    _check_forest(opts)
    model = opts.model
    classes = [str(c) for c in (opts.class_names or model.classes_)]
    if len(classes) != len(model.classes_):
        raise ExportError(
            f"{len(classes)} class names given, model has {len(model.classes_)}"
        )

    doc = {
        "schema_version": SCHEMA_VERSION,
        "features": [{"name": str(n), "kind": "numeric"} for n in opts.feature_names],
        "classes": classes,
        "trees": [],
    }
    for est in model.estimators_:
        tree_doc = _export_tree(est, opts.vote_mode)
        if opts.compute_oob and opts.train_X is not None and opts.train_y is not None:
            oob = _bootstrap_oob_accuracy(
                model, est, len(opts.train_X), np.asarray(opts.train_X), np.asarray(opts.train_y)
            )
            if oob is not None:
                tree_doc["oob_accuracy"] = oob
        doc["trees"].append(tree_doc)

    if opts.output_path:
        with open(opts.output_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return doc


def export_dataset(X, feature_names, path, y=None, class_names=None, label="class") -> None:
    """Write rows as RFC-4180 CSV with the header the toolchain expects."""
    import csv

    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise ExportError("feature_names length does not match the data width")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(map(str, feature_names)) + ([label] if y is not None else [])
        writer.writerow(header)
        for i in range(len(X)):
            row = [v if not float(v).is_integer() else int(v) for v in X[i]]
            if y is not None:
                name = class_names[int(y[i])] if class_names else y[i]
                row.append(name)
            writer.writerow(row)
