import numpy as np
import pytest

import forestrules as fr
from forestrules.errors import FitnessEvaluationError, InfeasibleSearchError
from forestrules.evaluate import ExplanationMetrics
from forestrules.optimize import (
    PsoConfig,
    default_opt_bounds,
    default_pro_bounds,
    opt_explain,
    pro_explain_params,
    pso_optimize,
    score_opt,
    score_pro,
)
from forestrules.simplify import GroupedRuleSet, RuleGroup, ExplanationParams


def _metrics(fidelity, scale):
    return ExplanationMetrics(fidelity=fidelity, scale=scale, n_rows=1, no_rule_rate=0.0)


def test_score_opt_midpoint_scale():
    # scale == classes x features puts the sigmoid at exactly one half
    for alpha in (0.0, 0.3, 0.9, 1.0):
        s = score_opt(_metrics(1.0, 16), alpha, 2, 8)
        assert s == pytest.approx(alpha + (1 - alpha) / 2)


def test_score_opt_reference_value():
    # frozen from an independent evaluation of the formula
    s = score_opt(_metrics(0.92, 6), 0.9, 2, 8)
    assert s == pytest.approx(0.9237912272084382, abs=1e-12)


def test_score_opt_alpha_one_is_fidelity():
    for scale in (0, 5, 500):
        assert score_opt(_metrics(0.73, scale), 1.0, 2, 8) == pytest.approx(0.73)


def test_score_opt_monotonicity_and_range():
    rng = np.random.default_rng(0)
    for _ in range(200):
        fid = rng.uniform(0.0, 0.95)
        scale = int(rng.integers(0, 300))
        alpha = rng.uniform(0.05, 0.95)
        s = score_opt(_metrics(fid, scale), alpha, 2, 8)
        assert 0.0 <= s <= 1.0
        assert score_opt(_metrics(fid + 0.05, scale), alpha, 2, 8) > s
        bigger = score_opt(_metrics(fid, scale + 10), alpha, 2, 8)
        # the size penalty saturates in float arithmetic far beyond the
        # normalization point, so strictness is only assertable before that
        if scale + 10 <= 2 * 16:
            assert bigger < s
        else:
            assert bigger <= s


def _expl_with(n_groups, scale_total):
    from forestrules.datasets import diabetes_space
    from forestrules.rules import Conjunct, DecisionRule

    per = max(1, scale_total // max(n_groups, 1))
    groups = []
    remaining = scale_total
    for g in range(n_groups):
        take = per if g < n_groups - 1 else remaining
        conjuncts = tuple(Conjunct(i % 8, lo=float(i)) for i in range(take))
        groups.append(
            RuleGroup((g + 1, 0), (DecisionRule(conjuncts, None, 1.0, (0, g)),))
        )
        remaining -= take
    return GroupedRuleSet(diabetes_space(), ExplanationParams(0, 0, 1, 1), tuple(groups), {})


def test_score_pro_values():
    assert score_pro(_expl_with(2, 40), 2) == 40
    assert score_pro(_expl_with(1, 40), 2) == 80
    assert score_pro(_expl_with(3, 40), 2) == 0  # clamped, never negative


# ---------------------------------------------------------------------------
# the swarm itself

def _sphere(center):
    center = np.asarray(center)

    def f(x):
        return -float(np.sum((x - center) ** 2))

    return f


def test_pso_finds_sphere_optimum():
    config = PsoConfig(bounds=((-10, 10),) * 3, n_particles=20, n_iterations=50, seed=0)
    result = pso_optimize(_sphere([1.5, -2.0, 3.0]), config)
    assert np.all(np.abs(result.best_params - [1.5, -2.0, 3.0]) < 1e-2)


def test_pso_single_particle_single_iteration_stays_put():
    config = PsoConfig(bounds=((-5, 5),) * 2, n_particles=1, n_iterations=1, seed=7)
    result = pso_optimize(_sphere([0, 0]), config)
    init = np.random.default_rng(7).uniform([-5, -5], [5, 5], size=(1, 2))[0]
    assert np.allclose(result.best_params, init)


def test_pso_seed_reproducible():
    config = PsoConfig(bounds=((-3, 3),) * 4, n_particles=10, n_iterations=15, seed=11)
    a = pso_optimize(_sphere([1, 1, 1, 1]), config)
    b = pso_optimize(_sphere([1, 1, 1, 1]), config)
    assert a.trace == b.trace
    assert np.array_equal(a.best_params, b.best_params)


def test_pso_trace_monotone_non_decreasing():
    for seed in range(5):
        config = PsoConfig(bounds=((-10, 10),) * 3, n_particles=8, n_iterations=30, seed=seed)
        result = pso_optimize(_sphere([0.3, 0.3, 0.3]), config)
        scores = [p.score for p in result.trace]
        assert all(a <= b for a, b in zip(scores, scores[1:]))


def test_pso_never_evaluates_outside_bounds():
    bounds = ((-1.0, 2.0), (0.5, 0.75))
    seen = []

    def f(x):
        seen.append(x.copy())
        return 0.0

    pso_optimize(f, PsoConfig(bounds=bounds, n_particles=6, n_iterations=10, seed=2))
    seen = np.asarray(seen)
    for d, (lo, hi) in enumerate(bounds):
        assert np.all(seen[:, d] >= lo - 1e-12)
        assert np.all(seen[:, d] <= hi + 1e-12)


def test_pso_integer_dims_rounded_at_evaluation():
    ints = []

    def f(x):
        ints.append(x[1])
        return 0.0

    pso_optimize(
        f,
        PsoConfig(bounds=((0, 1), (1, 50)), n_particles=5, n_iterations=5, seed=3, integer_dims=(1,)),
    )
    assert all(float(v).is_integer() for v in ints)


def test_pso_propagates_fitness_failure_with_params():
    def bad(x):
        raise RuntimeError("boom")

    with pytest.raises(FitnessEvaluationError):
        pso_optimize(bad, PsoConfig(bounds=((0, 1),), n_particles=2, n_iterations=2, seed=0))


def test_pso_config_validation():
    with pytest.raises(ValueError):
        PsoConfig(bounds=((1, 0),))
    with pytest.raises(ValueError):
        PsoConfig(bounds=((0, 1),), n_particles=0)
    with pytest.raises(ValueError):
        PsoConfig(bounds=((0, 1),), inertia_start=0.3, inertia_end=0.5)


# ---------------------------------------------------------------------------
# end-to-end searches (small budgets; full budgets live in the acceptance suite)

def test_opt_explain_returns_coherent_report(diabetes_forest, diabetes_rules, diabetes_split):
    _, test = diabetes_split
    pso = PsoConfig(bounds=default_opt_bounds(2), n_particles=6, n_iterations=6, seed=0, integer_dims=(3,))
    expl, report = opt_explain(diabetes_forest, test, alpha=0.9, pso=pso, rules=diabetes_rules)
    assert isinstance(expl, GroupedRuleSet)
    assert report.metrics.scale == fr.scale(expl)
    assert 0.0 <= report.metrics.fidelity <= 1.0
    assert report.score <= 1.0
    assert len(report.trace) == 7
    # the report's explanation evaluates identically when recomputed
    again = fr.evaluate_explanation(expl, diabetes_forest, test)
    assert again.fidelity == report.metrics.fidelity
    assert again.scale == report.metrics.scale


def test_alpha_zero_drives_scale_to_nothing(diabetes_forest, diabetes_rules, diabetes_split):
    _, test = diabetes_split
    pso = PsoConfig(bounds=default_opt_bounds(2), n_particles=8, n_iterations=10, seed=1, integer_dims=(3,))
    expl, report = opt_explain(diabetes_forest, test, alpha=0.0, pso=pso, rules=diabetes_rules)
    assert report.metrics.scale <= 2


def test_pro_explain_covers_every_class(diabetes_forest, diabetes_rules, diabetes_split):
    _, test = diabetes_split
    pso = PsoConfig(bounds=default_pro_bounds(2), n_particles=8, n_iterations=8, seed=2, integer_dims=(3,))
    expl, report = pro_explain_params(diabetes_forest, test, pso=pso, rules=diabetes_rules)
    owners = {int(np.argmax(g.signature)) for g in expl.groups}
    assert owners == {0, 1}
    assert report.score > 0


def test_pro_explain_infeasible_on_one_class_model(two_feature_space):
    from forestrules.model import DecisionTreeModel, EnsembleModel, TreeNode

    model = EnsembleModel(
        two_feature_space, (DecisionTreeModel({0: TreeNode(0, [5, 0])}, 0),)
    )
    pso = PsoConfig(bounds=default_pro_bounds(2), n_particles=4, n_iterations=3, seed=0, integer_dims=(3,))
    with pytest.raises(InfeasibleSearchError):
        pro_explain_params(model, None, pso=pso)
