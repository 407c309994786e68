"""Minimal reader/predictor for the portable forest schema.

Only depends on the published file format, so the exporter can verify its
own output without importing the consuming toolchain: load the JSON, walk
each tree with the schema's conventions (numeric ``value >= threshold``
and nominal membership go right), sum weighted leaf counts, take the
argmax (lowest index on ties).
"""

from __future__ import annotations

import json

import numpy as np


def load_schema(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def predict_schema(doc: dict, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    m = len(doc["classes"])
    votes = np.zeros((len(X), m))
    cat_index = {}
    for f, feat in enumerate(doc["features"]):
        if feat.get("kind") == "nominal":
            cat_index[f] = {c: i for i, c in enumerate(feat["categories"])}

    for tree in doc["trees"]:
        nodes = {n["id"]: n for n in tree["nodes"]}
        for i, x in enumerate(X):
            node = nodes[tree["root"]]
            while node["kind"] == "internal":
                v = x[node["feature"]]
                if "threshold" in node:
                    go_right = v >= node["threshold"]
                else:
                    members = {cat_index[node["feature"]][c] for c in node["categories"]}
                    go_right = int(v) in members
                node = nodes[node["right"] if go_right else node["left"]]
            votes[i] += tree["weight"] * np.asarray(node["counts"], dtype=float)
    return votes


def predict_classes(doc: dict, X) -> np.ndarray:
    return np.argmax(predict_schema(doc, X), axis=1)
