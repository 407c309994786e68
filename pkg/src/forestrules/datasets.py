"""Seeded synthetic datasets for demos, tests, and the acceptance suite.

``synthetic_diabetes`` fabricates a two-class clinical-style table with the
shape of the classic 8-feature, 768-row diabetes screening task: class
base rate about 35%, four informative measurements with overlapping
class-conditional distributions, four weak ones.  The overlap is tuned so
a 100-tree forest lands near 80% test accuracy, which is the regime the
explanation pipeline is meant for.  It is generated data: useful for
reproducible experiments, not for medical conclusions.
"""

from __future__ import annotations

import numpy as np

from .model import Dataset, FeatureDecl, FeatureSpace


def diabetes_space() -> FeatureSpace:
    names = ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age"]
    return FeatureSpace(
        tuple(FeatureDecl(n) for n in names),
        ("negative", "positive"),
    )


def synthetic_diabetes(n_rows: int = 768, seed: int = 11, label_noise: float = 0.10) -> Dataset:
    """One dominant measurement (plas), a few mildly informative ones, and
    label flips: forests reach about 80% accuracy, and small rule sets can
    mimic most of their behaviour."""
    space = diabetes_space()
    rng = np.random.default_rng(seed)
    y = (rng.uniform(size=n_rows) < 0.35).astype(np.int64)
    neg = y == 0
    pos = y == 1
    n_neg, n_pos = int(neg.sum()), int(pos.sum())

    def two(where_neg, where_pos):
        out = np.empty(n_rows)
        out[neg] = where_neg
        out[pos] = where_pos
        return out

    preg = two(rng.poisson(3.0, n_neg), rng.poisson(4.7, n_pos)).clip(0, 17)
    plas = two(rng.normal(108, 23, n_neg), rng.normal(150, 27, n_pos)).clip(44, 199).round()
    pres = two(rng.normal(68, 17, n_neg), rng.normal(71, 18, n_pos)).clip(24, 122).round()
    skin = two(rng.normal(27, 10, n_neg), rng.normal(30, 10, n_pos)).clip(7, 99).round()
    insu = two(rng.exponential(88, n_neg), rng.exponential(115, n_pos)).clip(14, 846).round()
    mass = two(rng.normal(30.3, 6.3, n_neg), rng.normal(35.5, 6.5, n_pos)).clip(18.0, 67.0).round(1)
    pedi = two(
        np.exp(rng.normal(-0.95, 0.5, n_neg)), np.exp(rng.normal(-0.67, 0.5, n_pos))
    ).clip(0.078, 2.42).round(3)
    age = two(21 + rng.gamma(1.6, 7.0, n_neg), 21 + rng.gamma(2.7, 7.0, n_pos)).clip(21, 81).round()

    X = np.column_stack([preg, plas, pres, skin, insu, mass, pedi, age])
    flip = rng.uniform(size=n_rows) < label_noise
    y = np.where(flip, 1 - y, y)
    return Dataset(space, X, y)


def make_separable(n_rows: int = 20, seed: int = 0) -> Dataset:
    """Two well-separated numeric blobs; a forest should fit it exactly."""
    space = FeatureSpace(
        (FeatureDecl("a"), FeatureDecl("b")),
        ("lo", "hi"),
    )
    rng = np.random.default_rng(seed)
    half = n_rows // 2
    y = np.r_[np.zeros(half, dtype=np.int64), np.ones(n_rows - half, dtype=np.int64)]
    X = np.empty((n_rows, 2))
    X[:half] = rng.normal((0.0, 0.0), 0.5, size=(half, 2))
    X[half:] = rng.normal((6.0, 6.0), 0.5, size=(n_rows - half, 2))
    return Dataset(space, X, y)


def make_blobs(
    n_rows: int,
    n_numeric: int = 4,
    n_classes: int = 2,
    seed: int = 0,
    n_nominal: int = 0,
    n_categories: int = 4,
    spread: float = 2.0,
) -> Dataset:
    """Gaussian class blobs plus optional class-skewed nominal columns."""
    rng = np.random.default_rng(seed)
    feats = [FeatureDecl(f"x{i}") for i in range(n_numeric)]
    cats = tuple(f"c{j}" for j in range(n_categories))
    feats += [FeatureDecl(f"n{i}", "nominal", cats) for i in range(n_nominal)]
    space = FeatureSpace(tuple(feats), tuple(f"k{c}" for c in range(n_classes)))

    y = rng.integers(0, n_classes, size=n_rows)
    centers = rng.normal(0.0, spread, size=(n_classes, n_numeric))
    X = np.empty((n_rows, len(feats)))
    X[:, :n_numeric] = centers[y] + rng.normal(0.0, 1.0, size=(n_rows, n_numeric))
    for j in range(n_nominal):
        # each class prefers one category, noisily
        pref = rng.integers(0, n_categories, size=n_classes)
        col = rng.integers(0, n_categories, size=n_rows)
        keep = rng.uniform(size=n_rows) < 0.5
        col[keep] = pref[y[keep]]
        X[:, n_numeric + j] = col
    return Dataset(space, X, y)
