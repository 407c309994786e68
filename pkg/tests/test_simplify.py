import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import forestrules as fr
from forestrules.model import DecisionTreeModel, EnsembleModel, TreeNode
from forestrules.rules import extract_rules
from forestrules.simplify import (
    ExplanationParams,
    class_signature,
    explanation_to_dict,
    filter_nodes,
    format_groups,
    load_explanation,
    node_quality,
    rule_quality,
    save_explanation,
    simp,
)

from conftest import sample_points
from oracles import entropy, info_gain


def test_params_validation():
    with pytest.raises(ValueError):
        ExplanationParams(-0.1, 0.5, 0.5, 3)
    with pytest.raises(ValueError):
        ExplanationParams(0.1, 1.5, 0.5, 3)
    with pytest.raises(ValueError):
        ExplanationParams(0.1, 0.5, 0.0, 3)
    with pytest.raises(ValueError):
        ExplanationParams(0.1, 0.5, 0.5, 0)


# ---------------------------------------------------------------------------
# node quality

def test_node_quality_matches_entropy_oracle(toy_tree_model):
    tree = toy_tree_model.trees[0]
    # split (5,8) -> (0,6), (5,2); value frozen from the entropy oracle
    assert node_quality(tree, 0) == pytest.approx(0.49647937549469, abs=1e-12)
    assert node_quality(tree, 0) == pytest.approx(info_gain([5, 8], [0, 6], [5, 2]), abs=1e-12)


def test_node_quality_zero_when_children_mirror_parent(two_feature_space):
    nodes = {
        0: TreeNode(0, [4, 2], feature=0, threshold=0.0, left=1, right=2),
        1: TreeNode(1, [2, 1]),
        2: TreeNode(2, [2, 1]),
    }
    tree = DecisionTreeModel(nodes, 0)
    assert node_quality(tree, 0) == 0.0


def test_node_quality_zero_for_pure_parent(two_feature_space):
    nodes = {
        0: TreeNode(0, [6, 0], feature=0, threshold=0.0, left=1, right=2),
        1: TreeNode(1, [2, 0]),
        2: TreeNode(2, [4, 0]),
    }
    tree = DecisionTreeModel(nodes, 0)
    assert node_quality(tree, 0) == 0.0


def test_node_quality_rejects_leaf_and_empty(two_feature_space):
    nodes = {
        0: TreeNode(0, [0, 0], feature=0, threshold=0.0, left=1, right=2),
        1: TreeNode(1, [0, 0]),
        2: TreeNode(2, [0, 0]),
    }
    tree = DecisionTreeModel(nodes, 0)
    with pytest.raises(Exception):
        node_quality(tree, 1)  # leaf
    with pytest.raises(Exception):
        node_quality(tree, 0)  # zero-count node


# ---------------------------------------------------------------------------
# node filter

def test_filter_at_zero_removes_nothing(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    filtered = filter_nodes(rules, toy_tree_model, 0.0)
    assert [len(r.conjuncts) for r in filtered.rules] == [len(r.conjuncts) for r in rules.rules]


def test_filter_above_entropy_bound_removes_everything(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    m = toy_tree_model.space.n_classes
    filtered = filter_nodes(rules, toy_tree_model, math.log2(m) + 0.01)
    assert all(r.is_top for r in filtered.rules)
    assert len(filtered) == len(rules)  # emptied rules stay


def test_filter_keeps_consequents(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    filtered = filter_nodes(rules, toy_tree_model, 10.0)
    for a, b in zip(rules.rules, filtered.rules):
        assert np.array_equal(a.votes, b.votes)
        assert a.weight == b.weight


# ---------------------------------------------------------------------------
# rule quality

def _leaf_rule(counts, leaf_id=1):
    from forestrules.rules import DecisionRule

    counts = np.asarray(counts, dtype=float)
    return DecisionRule((), counts, float(counts.sum()), (0, leaf_id))


def _tree_with_acc(acc):
    return DecisionTreeModel({0: TreeNode(0, [1, 1])}, 0, oob_accuracy=acc)


def test_rule_quality_pure_leaf_equals_acc():
    assert rule_quality(_leaf_rule([7, 0]), _tree_with_acc(0.8)) == pytest.approx(0.8)


def test_rule_quality_uniform_leaf_is_zero():
    assert rule_quality(_leaf_rule([1, 1]), _tree_with_acc(0.37)) == pytest.approx(0.0)


def test_rule_quality_mixed_leaf_matches_oracle():
    # (3,1) leaf, acc 1.0: value frozen from the entropy oracle
    rq = rule_quality(_leaf_rule([3, 1]), _tree_with_acc(1.0))
    assert rq == pytest.approx(0.18872187554086717, abs=1e-12)
    assert rq == pytest.approx((1 - entropy([3, 1])) / 1.0, abs=1e-12)


def test_rule_quality_defaults_missing_oob_to_one():
    assert rule_quality(_leaf_rule([7, 0]), _tree_with_acc(None)) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# class signature

def test_signature_examples():
    assert class_signature([30, 0], 0.83) == (2, 0)
    assert class_signature([1, 1], 0.5) == (1, 1)
    assert class_signature([7, 3], 0.25) == (3, 2)


def test_signature_rejects_empty():
    with pytest.raises(ValueError):
        class_signature([0, 0], 0.5)


def test_signature_unit_granularity_is_presence_indicator():
    rng = np.random.default_rng(0)
    for _ in range(100):
        counts = rng.integers(0, 10, size=4)
        if counts.sum() == 0:
            continue
        sig = class_signature(counts, 1.0)
        assert all(v in (0, 1) for v in sig)
        assert all((v == 1) == (c > 0) for v, c in zip(sig, counts))


@settings(max_examples=100, deadline=None)
@given(
    counts=st.lists(st.integers(0, 50), min_size=2, max_size=5).filter(lambda c: sum(c) > 0),
    psi=st.floats(0.01, 1.0),
)
def test_signature_entries_bounded(counts, psi):
    sig = class_signature(counts, psi)
    assert all(v >= 0 for v in sig)
    assert all(v <= math.ceil(1.0 / psi) + 1 for v in sig)


# ---------------------------------------------------------------------------
# the full pipeline

def test_simp_on_toy_model(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    expl = simp(rules, toy_tree_model, ExplanationParams(0.0, 0.0, 1.0, 10))
    assert expl.n_rules == 3
    # presence signatures: (0,6)->(0,1); (2,1) and (3,1)->(1,1)
    sigs = {g.signature for g in expl.groups}
    assert sigs == {(0, 1), (1, 1)}
    text = format_groups(expl)
    assert "G1" in text and "signature" in text


def test_simp_empty_result_flagged(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    # no rule is pure with acc 0.9, so rq < 1; threshold 1 clears everything
    expl = simp(rules, toy_tree_model, ExplanationParams(0.0, 1.0, 1.0, 10))
    assert expl.n_rules == 0
    assert "empty_result" in expl.provenance["warnings"]


def test_group_cap_and_weight_order(diabetes_simplifier):
    res = diabetes_simplifier.run(ExplanationParams(0.0, 0.0, 1.0, 3))
    assert res.n_groups >= 1
    for g in range(res.n_groups):
        members = np.flatnonzero(res.group_of == g)
        assert 1 <= len(members) <= 3
        w = res.weights[members]
        assert np.all(np.diff(w) <= 1e-12)  # weight-first order inside groups


def test_groups_share_signature_and_scale_adds_up(diabetes_simplifier):
    res = diabetes_simplifier.run(ExplanationParams(0.2, 0.3, 0.5, 5))
    expl = diabetes_simplifier.grouped(res)
    total = 0
    for g in expl.groups:
        assert len(g.rules) <= 5
        total += sum(len(r.conjuncts) for r in g.rules)
    assert total == res.scale
    assert fr.scale(expl) == res.scale


def test_merge_stage_preserves_satisfaction(diabetes_simplifier, diabetes_forest, diabetes_split):
    # node filter off: merged rules must hold exactly when raw atom
    # conjunctions hold
    res = diabetes_simplifier.run(ExplanationParams(0.0, 0.0, 1.0, 10 ** 9))
    raw_rules = diabetes_simplifier.rules.rules
    X = sample_points(diabetes_forest.space, 200, seed=3, data=diabetes_split[0])
    expl = diabetes_simplifier.grouped(res)
    flat = [(g, r) for g in expl.groups for r in g.rules]
    rng = np.random.default_rng(0)
    for g, merged_rule in [flat[i] for i in rng.choice(len(flat), size=50, replace=False)]:
        raw = next(r for r in raw_rules if r.origin == merged_rule.origin)
        for x in X[:40]:
            raw_ok = all(c.holds(x[c.feature]) for c in raw.conjuncts)
            new_ok = all(c.holds(x[c.feature]) for c in merged_rule.conjuncts)
            assert raw_ok == new_ok


def test_scale_monotone_in_node_threshold(diabetes_simplifier):
    m = 2
    scales = [
        diabetes_simplifier.run(ExplanationParams(phi, 0.2, 0.5, 7)).scale
        for phi in np.linspace(0.0, math.log2(m), 6)
    ]
    assert all(a >= b for a, b in zip(scales, scales[1:]))


def test_scale_monotone_in_rule_threshold_uncapped(diabetes_simplifier):
    # with a non-binding cap, a stricter rule filter can only shrink the pool
    scales = [
        diabetes_simplifier.run(ExplanationParams(0.1, theta, 0.5, 10 ** 9)).scale
        for theta in np.linspace(0.0, 1.0, 6)
    ]
    assert all(a >= b for a, b in zip(scales, scales[1:]))


def test_granularity_one_bounds_group_count(diabetes_simplifier):
    m = 2
    res = diabetes_simplifier.run(ExplanationParams(0.0, 0.0, 1.0, 10 ** 9))
    assert res.n_groups <= 2 ** m - 1
    assert np.isin(res.signatures, (0, 1)).all()


def test_emptied_rules_stay_eligible(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    expl = simp(rules, toy_tree_model, ExplanationParams(10.0, 0.0, 1.0, 10))
    assert expl.n_rules == 3
    assert all(r.is_top for g in expl.groups for r in g.rules)
    assert fr.scale(expl) == 0


def test_provenance_records_model_and_oob_default(toy_tree_model):
    rules = extract_rules(toy_tree_model)
    expl = simp(rules, toy_tree_model, ExplanationParams(0.0, 0.0, 1.0, 10))
    from forestrules.model import model_digest

    assert expl.provenance["model_sha256"] == model_digest(toy_tree_model)
    assert expl.provenance["oob_defaulted"] is False

    bare = EnsembleModel(
        toy_tree_model.space,
        tuple(DecisionTreeModel(t.nodes, t.root, t.weight, None) for t in toy_tree_model.trees),
    )
    expl2 = simp(extract_rules(bare), bare, ExplanationParams(0.0, 0.0, 1.0, 10))
    assert expl2.provenance["oob_defaulted"] is True


def test_explanation_json_round_trip(tmp_path, diabetes_simplifier):
    res = diabetes_simplifier.run(ExplanationParams(0.3, 0.4, 0.83, 3))
    expl = diabetes_simplifier.grouped(res)
    path = tmp_path / "expl.json"
    save_explanation(expl, path)
    back = load_explanation(path)
    assert explanation_to_dict(back) == explanation_to_dict(expl)
    assert back.space == expl.space
