"""Classification with a grouped explanation, plus its two quality measures.

An instance is scored by summing ``weight x group signature`` over every
satisfied rule; the largest component wins.  Fidelity is the fraction of
rows on which that prediction agrees with the source ensemble; scale is
the total conjunct count of the explanation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DataError
from .model import Dataset, EnsembleModel
from .rules import satisfies
from .simplify import GroupedRuleSet


@dataclass(frozen=True)
class ExplanationMetrics:
    fidelity: float
    scale: int
    n_rows: int
    no_rule_rate: float
    accuracy: float | None = None

    def to_dict(self) -> dict:
        d = {
            "fidelity": self.fidelity,
            "scale": self.scale,
            "n_rows": self.n_rows,
            "no_rule_rate": self.no_rule_rate,
        }
        if self.accuracy is not None:
            d["accuracy"] = self.accuracy
        return d


def scale(expl: GroupedRuleSet) -> int:
    """Total conjunct count; rules with empty antecedents contribute 0."""
    return sum(len(r.conjuncts) for _, r in expl.iter_rules())


@dataclass(frozen=True)
class _ExplArrays:
    pack: kernels.RulePack
    contrib: np.ndarray
    fallback: int


def _expl_arrays(expl: GroupedRuleSet) -> _ExplArrays:
    rows = []
    contrib = []
    for g, r in expl.iter_rules():
        rows.append(r.conjuncts)
        contrib.append(r.weight * np.asarray(g.signature, dtype=np.float64))
    m = expl.space.n_classes
    contrib = np.asarray(contrib, dtype=np.float64).reshape(len(rows), m)
    return _ExplArrays(kernels.pack_conjunct_rows(rows), contrib, fallback_class(contrib, m))


def fallback_class(contrib: np.ndarray, n_classes: int) -> int:
    """Class holding the largest weighted-signature mass of the explanation;
    used when an instance satisfies no rule at all."""
    if not len(contrib):
        return 0
    return int(np.argmax(contrib.sum(axis=0)))


def scores_to_classes(scores: np.ndarray, nsat: np.ndarray, fallback: int) -> np.ndarray:
    classes = np.argmax(scores, axis=1)
    classes[nsat == 0] = fallback
    return classes


def predict_explanation(expl: GroupedRuleSet, x: Sequence[float]) -> tuple[np.ndarray, int]:
    """Score vector and predicted class for one instance (ties break low)."""
    m = expl.space.n_classes
    scores = np.zeros(m)
    hit = False
    for g, r in expl.iter_rules():
        if satisfies(r, x):
            hit = True
            scores += r.weight * np.asarray(g.signature, dtype=np.float64)
    if not hit:
        arrays = _expl_arrays(expl)
        return scores, arrays.fallback
    return scores, int(np.argmax(scores))


def predict_explanation_batch(expl: GroupedRuleSet, X: np.ndarray):
    """Vectorized prediction: (scores, classes, no_rule mask)."""
    arrays = _expl_arrays(expl)
    scores, nsat = kernels.rule_scores(arrays.pack, X, arrays.contrib)
    return scores, scores_to_classes(scores, nsat, arrays.fallback), nsat == 0


@dataclass(frozen=True)
class InstanceTrace:
    """Per-instance prediction trace: which rules fired, with what effect."""

    scores: np.ndarray
    class_index: int
    satisfied: tuple[tuple[int, int], ...]  # (group index, rule index within group)
    no_rule: bool


def explain_instance(expl: GroupedRuleSet, x: Sequence[float]) -> InstanceTrace:
    m = expl.space.n_classes
    scores = np.zeros(m)
    hits = []
    for gi, g in enumerate(expl.groups):
        for ri, r in enumerate(g.rules):
            if satisfies(r, x):
                hits.append((gi, ri))
                scores += r.weight * np.asarray(g.signature, dtype=np.float64)
    if hits:
        cls = int(np.argmax(scores))
    else:
        cls = _expl_arrays(expl).fallback
    return InstanceTrace(scores, cls, tuple(hits), not hits)


def fidelity(expl: GroupedRuleSet, model: EnsembleModel, data: Dataset) -> float:
    """Agreement rate between explanation and ensemble on unlabeled rows."""
    if data.n_rows == 0:
        raise DataError("fidelity is undefined on an empty dataset")
    truth = kernels.forest_classes(kernels.pack_forest(model), data.X)
    _, classes, _ = predict_explanation_batch(expl, data.X)
    return float(np.mean(classes == truth))


def evaluate_explanation(
    expl: GroupedRuleSet, model: EnsembleModel, data: Dataset
) -> ExplanationMetrics:
    if data.n_rows == 0:
        raise DataError("evaluation needs at least one row")
    truth = kernels.forest_classes(kernels.pack_forest(model), data.X)
    _, classes, no_rule = predict_explanation_batch(expl, data.X)
    accuracy = None
    if data.labels is not None:
        accuracy = float(np.mean(classes == data.labels))
    return ExplanationMetrics(
        fidelity=float(np.mean(classes == truth)),
        scale=scale(expl),
        n_rows=data.n_rows,
        no_rule_rate=float(np.mean(no_rule)),
        accuracy=accuracy,
    )
