"""Four-stage simplification of an extracted rule set.

Fixed stage order: (1) drop antecedent atoms whose source node gained too
little information, (2) merge the surviving atoms into one conjunct per
feature, (3) drop whole rules of low quality, (4) group the survivors by
class signature, (5) keep the heaviest rules of each group.  Stage 2 is
exactly region-preserving per rule; the other stages are lossy by design.

``Simplifier`` precomputes everything that does not depend on the four
parameters (node gains, rule qualities, ratio matrix, the flat atom pack),
so a parameter search can re-run the pipeline hundreds of times cheaply.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .errors import ContradictionError, ModelFormatError, ModelValidationError
from .model import (
    DecisionTreeModel,
    EnsembleModel,
    FeatureSpace,
    model_digest,
)
from .rules import (
    Conjunct,
    DecisionRule,
    RuleSet,
    conjunct_from_dict,
    conjunct_to_dict,
)

# guards ceil(ratio / granularity) against float wobble at exact multiples
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class ExplanationParams:
    """The four knobs of the simplification pipeline."""

    node_threshold: float
    rule_threshold: float
    merge_granularity: float
    group_cap: int

    def __post_init__(self):
        if self.node_threshold < 0:
            raise ValueError("node_threshold must be >= 0")
        if not 0.0 <= self.rule_threshold <= 1.0:
            raise ValueError("rule_threshold must be in [0, 1]")
        if not 0.0 < self.merge_granularity <= 1.0:
            raise ValueError("merge_granularity must be in (0, 1]")
        if self.group_cap < 1:
            raise ValueError("group_cap must be >= 1")

    def to_dict(self) -> dict:
        return {
            "node_threshold": self.node_threshold,
            "rule_threshold": self.rule_threshold,
            "merge_granularity": self.merge_granularity,
            "group_cap": self.group_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExplanationParams":
        return cls(
            float(d["node_threshold"]),
            float(d["rule_threshold"]),
            float(d["merge_granularity"]),
            int(d["group_cap"]),
        )


@dataclass(frozen=True)
class RuleGroup:
    signature: tuple[int, ...]
    rules: tuple[DecisionRule, ...]

    @property
    def total_weight(self) -> float:
        return sum(r.weight for r in self.rules)


@dataclass(frozen=True)
class GroupedRuleSet:
    space: FeatureSpace
    params: ExplanationParams
    groups: tuple[RuleGroup, ...]
    provenance: dict

    @property
    def n_rules(self) -> int:
        return sum(len(g.rules) for g in self.groups)

    def iter_rules(self) -> Iterable[tuple[RuleGroup, DecisionRule]]:
        for g in self.groups:
            for r in g.rules:
                yield g, r


def entropy_bits(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty distribution is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def information_gain(parent, left, right) -> float:
    parent = np.asarray(parent, dtype=np.float64)
    n = parent.sum()
    nl = np.asarray(left, dtype=np.float64).sum()
    nr = np.asarray(right, dtype=np.float64).sum()
    gain = entropy_bits(parent) - (nl / n) * entropy_bits(left) - (nr / n) * entropy_bits(right)
    return max(0.0, gain)


def node_quality(tree: DecisionTreeModel, node_id: int) -> float:
    """Information gain of an internal node's split, in bits."""
    node = tree.nodes[node_id]
    if node.is_leaf:
        raise ValueError(f"node {node_id} is a leaf")
    if node.counts.sum() <= 0:
        raise ModelValidationError(f"node {node_id} has zero instance count")
    return information_gain(node.counts, tree.nodes[node.left].counts, tree.nodes[node.right].counts)


def rule_quality(rule: DecisionRule, tree: DecisionTreeModel) -> float:
    """Leaf purity relative to the class count, scaled by the tree's
    out-of-bag accuracy (1.0 when the model does not carry one)."""
    if rule.votes is None or rule.votes.sum() <= 0:
        raise ValueError("rule has no leaf distribution")
    m = len(rule.votes)
    acc = tree.oob_accuracy if tree.oob_accuracy is not None else 1.0
    rq = (math.log2(m) - entropy_bits(rule.votes)) / math.log2(m) * acc
    return min(1.0, max(0.0, rq))


def class_signature(counts, merge_granularity: float) -> tuple[int, ...]:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("signature of an all-zero distribution is undefined")
    if not 0.0 < merge_granularity <= 1.0:
        raise ValueError("merge_granularity must be in (0, 1]")
    ratios = counts / total
    sig = np.ceil(ratios / merge_granularity - _CEIL_EPS).astype(np.int64)
    return tuple(int(v) for v in sig)


def _signature_matrix(ratios: np.ndarray, merge_granularity: float) -> np.ndarray:
    return np.ceil(ratios / merge_granularity - _CEIL_EPS).astype(np.int64)


def _node_gain_maps(model: EnsembleModel) -> list[dict[int, float]]:
    maps = []
    for tree in model.trees:
        gains = {
            nid: node_quality(tree, nid)
            for nid, node in tree.nodes.items()
            if not node.is_leaf
        }
        maps.append(gains)
    return maps


def filter_nodes(rules: RuleSet, model: EnsembleModel, node_threshold: float) -> RuleSet:
    """Drop antecedent atoms whose source node gained less than the cutoff.

    Rules whose antecedent empties out stay (an empty antecedent is true
    everywhere); their consequents still carry class information.
    """
    gains = _node_gain_maps(model)
    out = []
    for rule in rules.rules:
        t = rule.origin[0]
        kept = []
        for c in rule.conjuncts:
            if c.source_node is None:
                raise ValueError("rule atoms lack source node ids; use freshly extracted rules")
            if gains[t][c.source_node] >= node_threshold:
                kept.append(c)
        out.append(DecisionRule(tuple(kept), rule.votes, rule.weight, rule.origin))
    return RuleSet(rules.space, tuple(out), rules.tree_weights)


@dataclass(frozen=True)
class SimpResult:
    """Array-level output of one pipeline run (see Simplifier.run).

    ``selected`` holds surviving rule indices ordered by (group, rank);
    ``group_of`` aligns each selected rule with its group; ``signatures``
    is one row per group in output order.
    """

    params: ExplanationParams
    selected: np.ndarray
    group_of: np.ndarray
    signatures: np.ndarray
    pack: kernels.RulePack
    weights: np.ndarray
    scale: int
    warnings: tuple[str, ...]

    @property
    def n_rules(self) -> int:
        return len(self.selected)

    @property
    def n_groups(self) -> int:
        return len(self.signatures)

    def contrib(self) -> np.ndarray:
        """Per-rule score contribution: rule weight times group signature."""
        if not len(self.selected):
            return np.zeros((0, self.signatures.shape[1]))
        return self.weights[:, None] * self.signatures[self.group_of]


class Simplifier:
    """Reusable pipeline over one (rule set, model) pair."""

    def __init__(self, rules: RuleSet, model: EnsembleModel):
        if len(model.trees) and model.space is not rules.space and model.space != rules.space:
            raise ValueError("rule set and model disagree on the feature space")
        self.space = model.space
        self.rules = rules
        self.model_sha256 = model_digest(model)
        self.oob_defaulted = any(t.oob_accuracy is None for t in model.trees)

        gains = _node_gain_maps(model)
        n_rules = len(rules.rules)
        m = self.space.n_classes

        offsets = [0]
        feat, kind, lo, hi, mask, nq = [], [], [], [], [], []
        self.rule_weight = np.empty(n_rules)
        self.rule_rq = np.empty(n_rules)
        self.ratios = np.empty((n_rules, m))
        self.tree_idx = np.empty(n_rules, dtype=np.int64)
        self.leaf_id = np.empty(n_rules, dtype=np.int64)
        for i, rule in enumerate(rules.rules):
            t = rule.origin[0]
            for c in sorted(rule.conjuncts, key=lambda c: c.feature):
                if c.source_node is None:
                    raise ValueError("rule atoms lack source node ids; use freshly extracted rules")
                k, l, h, mk = kernels._conjunct_fields(c)
                feat.append(c.feature)
                kind.append(k)
                lo.append(l)
                hi.append(h)
                mask.append(mk)
                nq.append(gains[t][c.source_node])
            offsets.append(len(feat))
            self.rule_weight[i] = rule.weight
            self.rule_rq[i] = rule_quality(rule, model.trees[t])
            self.ratios[i] = rule.votes / rule.votes.sum()
            self.tree_idx[i] = t
            self.leaf_id[i] = rule.origin[1]

        self.pack = kernels.RulePack(
            offsets=np.asarray(offsets, dtype=np.int64),
            feat=np.asarray(feat, dtype=np.int32),
            kind=np.asarray(kind, dtype=np.uint8),
            lo=np.asarray(lo, dtype=np.float64),
            hi=np.asarray(hi, dtype=np.float64),
            mask=np.asarray(mask, dtype=np.uint64),
        )
        self.atom_nq = np.asarray(nq, dtype=np.float64)

        # a contradictory raw branch means the model itself is corrupt
        _, bad = kernels.merge_pack(self.pack, np.ones(self.pack.n_atoms, dtype=np.uint8))
        if bad >= 0:
            origin = rules.rules[bad].origin
            raise ContradictionError(
                f"rule {bad} (tree {origin[0]}, leaf {origin[1]}) has an unsatisfiable antecedent"
            )

    def _empty(self, params: ExplanationParams) -> SimpResult:
        m = self.space.n_classes
        return SimpResult(
            params=params,
            selected=np.zeros(0, dtype=np.int64),
            group_of=np.zeros(0, dtype=np.int64),
            signatures=np.zeros((0, m), dtype=np.int64),
            pack=kernels.pack_conjunct_rows([]),
            weights=np.zeros(0),
            scale=0,
            warnings=("empty_result",),
        )

    def run(self, params: ExplanationParams) -> SimpResult:
        keep = self.atom_nq >= params.node_threshold
        merged, bad = kernels.merge_pack(self.pack, keep)
        if bad >= 0:  # dropping atoms can only widen regions
            raise ContradictionError(f"rule {bad} became unsatisfiable during merge")

        kept = np.flatnonzero(self.rule_rq >= params.rule_threshold)
        if not len(kept):
            return self._empty(params)

        sig = _signature_matrix(self.ratios[kept], params.merge_granularity)
        uniq, inverse = np.unique(sig, axis=0, return_inverse=True)

        order = np.lexsort(
            (self.leaf_id[kept], self.tree_idx[kept], -self.rule_rq[kept],
             -self.rule_weight[kept], inverse)
        )
        g_sorted = inverse[order]
        starts = np.flatnonzero(np.r_[True, g_sorted[1:] != g_sorted[:-1]])
        counts = np.diff(np.r_[starts, len(g_sorted)])
        rank = np.arange(len(g_sorted)) - np.repeat(starts, counts)
        take = rank < params.group_cap

        sel_local = order[take]
        selected = kept[sel_local]
        g_of = g_sorted[take]

        # output order: heaviest group first, signature breaks ties
        gweight = np.bincount(g_of, weights=self.rule_weight[selected], minlength=len(uniq))
        present = np.flatnonzero(np.bincount(g_of, minlength=len(uniq)))
        final = sorted(present, key=lambda g: (-gweight[g], tuple(uniq[g])))
        remap = {g: i for i, g in enumerate(final)}
        new_g = np.asarray([remap[g] for g in g_of], dtype=np.int64)
        reorder = np.argsort(new_g, kind="stable")

        selected = selected[reorder]
        new_g = new_g[reorder]
        sel_pack = kernels.take_rules(merged, selected)
        return SimpResult(
            params=params,
            selected=selected,
            group_of=new_g,
            signatures=uniq[final],
            pack=sel_pack,
            weights=self.rule_weight[selected],
            scale=int(sel_pack.n_atoms),
            warnings=(),
        )

    def _conjuncts_of(self, pack: kernels.RulePack, r: int) -> tuple[Conjunct, ...]:
        out = []
        for a in range(int(pack.offsets[r]), int(pack.offsets[r + 1])):
            if pack.kind[a] == 0:
                out.append(Conjunct(int(pack.feat[a]), lo=float(pack.lo[a]), hi=float(pack.hi[a])))
            else:
                mask = int(pack.mask[a])
                cats = frozenset(i for i in range(kernels.MAX_MASK_CATEGORIES) if mask >> i & 1)
                out.append(Conjunct(int(pack.feat[a]), categories=cats))
        return tuple(out)

    def grouped(self, result: SimpResult) -> GroupedRuleSet:
        groups = []
        for g in range(result.n_groups):
            members = np.flatnonzero(result.group_of == g)
            rules = tuple(
                DecisionRule(
                    conjuncts=self._conjuncts_of(result.pack, int(i)),
                    votes=self.rules.rules[int(result.selected[i])].votes,
                    weight=float(result.weights[i]),
                    origin=self.rules.rules[int(result.selected[i])].origin,
                )
                for i in members
            )
            groups.append(RuleGroup(tuple(int(v) for v in result.signatures[g]), rules))
        provenance = {
            "model_sha256": self.model_sha256,
            "features": [
                {"name": f.name, "kind": f.kind, **({"categories": list(f.categories)} if f.categories else {})}
                for f in self.space.features
            ],
            "classes": list(self.space.classes),
            "oob_defaulted": self.oob_defaulted,
            "warnings": list(result.warnings),
        }
        return GroupedRuleSet(self.space, result.params, tuple(groups), provenance)


def simp(rules: RuleSet, model: EnsembleModel, params: ExplanationParams) -> GroupedRuleSet:
    """One-shot pipeline run; build a Simplifier directly to sweep parameters."""
    s = Simplifier(rules, model)
    return s.grouped(s.run(params))


# ---------------------------------------------------------------------------
# serialization and pretty printing

def explanation_to_dict(expl: GroupedRuleSet) -> dict:
    return {
        "params": expl.params.to_dict(),
        "groups": [
            {
                "signature": list(g.signature),
                "rules": [
                    {
                        "conjuncts": [conjunct_to_dict(c, expl.space) for c in r.conjuncts],
                        "weight": r.weight,
                        "origin": list(r.origin),
                    }
                    for r in g.rules
                ],
            }
            for g in expl.groups
        ],
        "provenance": expl.provenance,
    }


def save_explanation(expl: GroupedRuleSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(explanation_to_dict(expl), fh, indent=1)
        fh.write("\n")


def explanation_from_dict(doc: dict) -> GroupedRuleSet:
    try:
        prov = doc["provenance"]
        from .model import _space_from_dict  # schema shared with the model codec

        space = _space_from_dict({"features": prov["features"], "classes": prov["classes"]})
        params = ExplanationParams.from_dict(doc["params"])
        groups = []
        for gd in doc["groups"]:
            rules = tuple(
                DecisionRule(
                    conjuncts=tuple(conjunct_from_dict(cd, space) for cd in rd["conjuncts"]),
                    votes=None,
                    weight=float(rd["weight"]),
                    origin=tuple(rd.get("origin", (-1, -1))),
                )
                for rd in gd["rules"]
            )
            groups.append(RuleGroup(tuple(int(v) for v in gd["signature"]), rules))
        return GroupedRuleSet(space, params, tuple(groups), dict(prov))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed explanation document: {exc}") from exc


def load_explanation(path) -> GroupedRuleSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read explanation file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"explanation file is not valid JSON: {exc}") from exc
    return explanation_from_dict(doc)


def format_groups(expl: GroupedRuleSet) -> str:
    """Human-readable table: group, class signature, rules, weights."""
    lines = []
    header = f"{'group':<8}{'signature':<18}{'rule':<46}{'weight':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for gi, g in enumerate(expl.groups, start=1):
        sig = "(" + ", ".join(str(v) for v in g.signature) + ")"
        for ri, r in enumerate(g.rules):
            body = " and ".join(c.format(expl.space) for c in r.conjuncts) or "(always)"
            lines.append(
                f"{('G' + str(gi)) if ri == 0 else '':<8}{sig if ri == 0 else '':<18}"
                f"{body:<46}{r.weight:>8g}"
            )
    if not expl.groups:
        lines.append("(empty explanation)")
    return "\n".join(lines)
