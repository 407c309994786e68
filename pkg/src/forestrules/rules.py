"""Conjunct algebra, tree-to-rule conversion, and the exact rule-set predictor.

Every root-to-leaf path of a tree becomes one decision rule: the conjunction
of the (possibly negated) node predicates along the path, implying the leaf's
weighted vote distribution.  Branches of one tree are mutually exclusive and
exhaustive, so the rule set extracted from an ensemble predicts exactly like
the ensemble itself: per instance, one rule per tree fires and the weighted
votes add up to the ensemble's vote sum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ContradictionError, ModelFormatError
from .model import EnsembleModel, FeatureSpace


@dataclass(frozen=True)
class Conjunct:
    """A single-feature constraint.

    Numeric: half-open interval ``lo <= v < hi`` (either side may be
    infinite).  Nominal: ``categories`` holds the admitted category
    indices.  ``source_node`` remembers the internal node that produced a
    raw path atom; merged conjuncts drop it.
    """

    feature: int
    lo: float = -math.inf
    hi: float = math.inf
    categories: frozenset[int] | None = None
    source_node: int | None = None

    def __post_init__(self):
        if self.categories is None:
            if not self.lo < self.hi:
                raise ValueError(f"empty interval [{self.lo}, {self.hi}) on feature {self.feature}")
        else:
            if not self.categories:
                raise ValueError(f"empty category set on feature {self.feature}")
            if self.lo != -math.inf or self.hi != math.inf:
                raise ValueError("nominal conjunct must not carry interval bounds")

    @property
    def is_numeric(self) -> bool:
        return self.categories is None

    def holds(self, value: float) -> bool:
        if self.categories is None:
            return self.lo <= value < self.hi
        return int(value) in self.categories

    def format(self, space: FeatureSpace) -> str:
        decl = space.features[self.feature]
        if self.categories is not None:
            names = [decl.categories[i] for i in sorted(self.categories)]
            if len(names) == 1:
                return f"{decl.name} = {names[0]}"
            return f"{decl.name} in {{{', '.join(names)}}}"
        if self.lo == -math.inf:
            return f"{decl.name} < {self.hi:g}"
        if self.hi == math.inf:
            return f"{decl.name} >= {self.lo:g}"
        return f"{self.lo:g} <= {decl.name} < {self.hi:g}"


@dataclass(frozen=True)
class DecisionRule:
    """Antecedent conjuncts implying a weighted vote distribution.

    ``weight`` is the number of training instances in the source leaf
    (the vote total before tree weighting); ``origin`` is (tree index,
    leaf node id).
    """

    conjuncts: tuple[Conjunct, ...]
    votes: np.ndarray | None
    weight: float
    origin: tuple[int, int]

    def __post_init__(self):
        if self.votes is not None:
            object.__setattr__(self, "votes", np.asarray(self.votes, dtype=np.float64))

    @property
    def is_top(self) -> bool:
        """True when the antecedent is empty (satisfied by every instance)."""
        return not self.conjuncts


@dataclass(frozen=True)
class RuleSet:
    space: FeatureSpace
    rules: tuple[DecisionRule, ...]
    tree_weights: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def n_atoms(self) -> int:
        """Total conjunct count over all rules (the raw scale measure)."""
        return sum(len(r.conjuncts) for r in self.rules)


def _negate(space: FeatureSpace, feature: int, threshold, categories, node_id):
    if threshold is not None:
        return Conjunct(feature, hi=threshold, source_node=node_id)
    universe = frozenset(range(len(space.features[feature].categories)))
    complement = universe - categories
    if not complement:
        raise ContradictionError(
            f"node {node_id}: category split admits every value, left branch is unsatisfiable"
        )
    return Conjunct(feature, categories=complement, source_node=node_id)


def _affirm(feature: int, threshold, categories, node_id):
    if threshold is not None:
        return Conjunct(feature, lo=threshold, source_node=node_id)
    return Conjunct(feature, categories=categories, source_node=node_id)


def extract_rules(model: EnsembleModel) -> RuleSet:
    """One rule per leaf per tree; consequents are leaf counts scaled by the
    tree weight, rule weights are the raw leaf instance counts."""
    rules: list[DecisionRule] = []
    for t, tree in enumerate(model.trees):
        collected: list[DecisionRule] = []
        stack: list[tuple[int, list[Conjunct]]] = [(tree.root, [])]
        while stack:
            nid, path = stack.pop()
            node = tree.nodes[nid]
            if node.is_leaf:
                collected.append(
                    DecisionRule(
                        conjuncts=tuple(path),
                        votes=tree.weight * node.counts,
                        weight=float(node.counts.sum()),
                        origin=(t, nid),
                    )
                )
                continue
            yes = _affirm(node.feature, node.threshold, node.categories, nid)
            no = _negate(model.space, node.feature, node.threshold, node.categories, nid)
            stack.append((node.right, path + [yes]))
            stack.append((node.left, path + [no]))
        collected.sort(key=lambda r: r.origin)
        rules.extend(collected)
    return RuleSet(model.space, tuple(rules), tuple(t.weight for t in model.trees))


def merge_conjuncts(conjuncts: Iterable[Conjunct]) -> list[Conjunct]:
    """Intersect all constraints per feature into at most one conjunct each.

    The satisfied region of the output equals the intersection of the
    inputs; an empty intersection raises ContradictionError, since correct
    training never produces an unsatisfiable branch.
    """
    lo: dict[int, float] = {}
    hi: dict[int, float] = {}
    cats: dict[int, frozenset[int]] = {}
    for c in conjuncts:
        f = c.feature
        if c.categories is None:
            lo[f] = max(lo.get(f, -math.inf), c.lo)
            hi[f] = min(hi.get(f, math.inf), c.hi)
            if lo[f] >= hi[f]:
                raise ContradictionError(
                    f"feature {f}: interval [{lo[f]}, {hi[f]}) is empty"
                )
        else:
            cur = cats.get(f)
            cats[f] = c.categories if cur is None else cur & c.categories
            if not cats[f]:
                raise ContradictionError(f"feature {f}: category intersection is empty")
    out = []
    for f in sorted(set(lo) | set(cats)):
        if f in cats:
            out.append(Conjunct(f, categories=cats[f]))
        else:
            out.append(Conjunct(f, lo=lo[f], hi=hi[f]))
    return out


def satisfies(rule: DecisionRule, x: Sequence[float]) -> bool:
    return all(c.holds(x[c.feature]) for c in rule.conjuncts)


def predict_ruleset(rules: RuleSet, x: Sequence[float]) -> tuple[np.ndarray, int]:
    """Aggregate the consequents of every satisfied rule; ties break low."""
    votes = np.zeros(rules.space.n_classes)
    for rule in rules.rules:
        if satisfies(rule, x):
            votes += rule.votes
    return votes, int(np.argmax(votes))


def pack_rules(rules: RuleSet) -> kernels.RulePack:
    return kernels.pack_conjunct_rows(r.conjuncts for r in rules.rules)


def ruleset_votes(rules: RuleSet, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch form of predict_ruleset: (votes (rows, m), satisfied-rule counts)."""
    pack = pack_rules(rules)
    contrib = np.stack([r.votes for r in rules.rules]) if rules.rules else np.zeros((0, rules.space.n_classes))
    return kernels.rule_scores(pack, X, contrib)


# ---------------------------------------------------------------------------
# JSON lines codec (extraction cache)

def conjunct_to_dict(c: Conjunct, space: FeatureSpace) -> dict:
    decl = space.features[c.feature]
    if c.categories is not None:
        return {"feature": decl.name, "categories": [decl.categories[i] for i in sorted(c.categories)]}
    return {
        "feature": decl.name,
        "lo": None if c.lo == -math.inf else c.lo,
        "hi": None if c.hi == math.inf else c.hi,
    }


def conjunct_from_dict(d: dict, space: FeatureSpace) -> Conjunct:
    f = space.feature_index(d["feature"])
    if "categories" in d:
        decl = space.features[f]
        return Conjunct(f, categories=frozenset(decl.categories.index(c) for c in d["categories"]))
    lo = d.get("lo")
    hi = d.get("hi")
    return Conjunct(f, lo=-math.inf if lo is None else float(lo),
                    hi=math.inf if hi is None else float(hi))


def save_rules_jsonl(rules: RuleSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rules.rules:
            doc = {
                "conjuncts": [conjunct_to_dict(c, rules.space) for c in r.conjuncts],
                "consequent": {"votes": list(r.votes)},
                "weight": r.weight,
                "origin": list(r.origin),
            }
            fh.write(json.dumps(doc) + "\n")


def load_rules_jsonl(path, space: FeatureSpace, tree_weights: tuple[float, ...] = ()) -> RuleSet:
    rules = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                rules.append(
                    DecisionRule(
                        conjuncts=tuple(conjunct_from_dict(d, space) for d in doc["conjuncts"]),
                        votes=np.asarray(doc["consequent"]["votes"], dtype=np.float64),
                        weight=float(doc["weight"]),
                        origin=tuple(doc["origin"]),
                    )
                )
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                raise ModelFormatError(f"rule file line {lineno}: {exc}") from exc
    return RuleSet(space, tuple(rules), tree_weights)
