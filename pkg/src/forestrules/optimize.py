"""Parameter search over the simplification pipeline.

A global-best particle swarm with linearly decreasing inertia searches the
four-dimensional box (node cutoff, rule cutoff, signature granularity,
group cap).  Two fitness functions are offered: one balances fidelity
against explanation size through a sigmoid penalty, the other rewards
large rule pools collapsed into exactly one group per class (the input
the per-class profiler wants).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import FitnessEvaluationError, InfeasibleSearchError
from .evaluate import ExplanationMetrics, scale as expl_scale, scores_to_classes, fallback_class
from .model import Dataset, EnsembleModel
from .rules import RuleSet, extract_rules
from .simplify import ExplanationParams, GroupedRuleSet, SimpResult, Simplifier


@dataclass(frozen=True)
class PsoConfig:
    bounds: tuple[tuple[float, float], ...]
    n_particles: int = 20
    n_iterations: int = 20
    inertia_start: float = 0.9
    inertia_end: float = 0.4
    # constriction-derived acceleration; 2.0 stalls near the optimum at the
    # 0.4 inertia floor, missing fine tolerances at small iteration budgets
    c1: float = 1.49445
    c2: float = 1.49445
    velocity_clamp: float = 0.5
    seed: int = 0
    integer_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_particles < 1 or self.n_iterations < 1:
            raise ValueError("n_particles and n_iterations must be >= 1")
        if not self.inertia_start >= self.inertia_end > 0:
            raise ValueError("need inertia_start >= inertia_end > 0")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"invalid bound ({lo}, {hi})")


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    params: tuple[float, ...]
    score: float


@dataclass(frozen=True)
class PsoResult:
    best_params: np.ndarray
    best_score: float
    trace: tuple[TracePoint, ...]


def score_opt(metrics: ExplanationMetrics, alpha: float, n_classes: int, n_features: int) -> float:
    """Fidelity weighted against a sigmoid size penalty centred at one
    conjunct per (class, feature) cell."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    squash = 1.0 / (1.0 + math.exp(5.0 * (metrics.scale / (n_classes * n_features) - 1.0)))
    return metrics.fidelity * alpha + (1.0 - alpha) * squash


def score_pro(expl: GroupedRuleSet, n_classes: int) -> float:
    """Rewards big rule pools in few groups; callers enforce class coverage."""
    return _score_pro_raw(len(expl.groups), expl_scale(expl), n_classes)


def _score_pro_raw(n_groups: int, scale_value: int, n_classes: int) -> float:
    return max(0, n_classes - n_groups + 1) * scale_value


def _rounded(x: np.ndarray, integer_dims: Sequence[int]) -> np.ndarray:
    out = x.copy()
    for d in integer_dims:
        out[d] = np.round(out[d])
    return out


def pso_optimize(fitness: Callable[[np.ndarray], float], config: PsoConfig) -> PsoResult:
    """Maximize fitness over the bounded box; fully seeded and reproducible.

    Positions stay continuous; dimensions listed in ``integer_dims`` are
    rounded on every evaluation.  The per-iteration trace records the best
    evaluated parameters so far; the score sequence never decreases.
    """
    lo = np.array([b[0] for b in config.bounds])
    hi = np.array([b[1] for b in config.bounds])
    span = hi - lo
    vmax = config.velocity_clamp * span
    P, D = config.n_particles, len(config.bounds)
    rng = np.random.default_rng(config.seed)

    def evaluate(x: np.ndarray) -> tuple[float, np.ndarray]:
        xr = _rounded(x, config.integer_dims)
        try:
            return float(fitness(xr)), xr
        except Exception as exc:  # noqa: BLE001 - reported with the params
            raise FitnessEvaluationError(xr, exc) from exc

    pos = rng.uniform(lo, hi, size=(P, D))
    vel = np.zeros((P, D))
    pbest_pos = pos.copy()
    pbest_score = np.empty(P)
    evaled = np.empty((P, D))
    for i in range(P):
        pbest_score[i], evaled[i] = evaluate(pos[i])

    def better(score, params, cur_score, cur_params):
        if score > cur_score:
            return True
        return score == cur_score and tuple(params) < tuple(cur_params)

    g = int(np.argmax(pbest_score))
    gbest_score = float(pbest_score[g])
    gbest_pos = pos[g].copy()
    gbest_params = evaled[g].copy()
    for i in range(P):
        if better(pbest_score[i], evaled[i], gbest_score, gbest_params):
            gbest_score, gbest_pos, gbest_params = float(pbest_score[i]), pos[i].copy(), evaled[i].copy()

    trace = [TracePoint(0, tuple(gbest_params), gbest_score)]
    for it in range(1, config.n_iterations + 1):
        if config.n_iterations > 1:
            frac = (it - 1) / (config.n_iterations - 1)
        else:
            frac = 0.0
        w = config.inertia_start - (config.inertia_start - config.inertia_end) * frac
        r1 = rng.uniform(size=(P, D))
        r2 = rng.uniform(size=(P, D))
        vel = w * vel + config.c1 * r1 * (pbest_pos - pos) + config.c2 * r2 * (gbest_pos - pos)
        vel = np.clip(vel, -vmax, vmax)
        pos = np.clip(pos + vel, lo, hi)
        for i in range(P):
            score, params = evaluate(pos[i])
            if score > pbest_score[i]:
                pbest_score[i] = score
                pbest_pos[i] = pos[i]
            if better(score, params, gbest_score, gbest_params):
                gbest_score, gbest_pos, gbest_params = score, pos[i].copy(), params.copy()
        trace.append(TracePoint(it, tuple(gbest_params), gbest_score))
    return PsoResult(gbest_params, gbest_score, tuple(trace))


def default_opt_bounds(n_classes: int) -> tuple[tuple[float, float], ...]:
    return ((0.0, math.log2(n_classes)), (0.0, 1.0), (0.01, 1.0), (1.0, 50.0))


def default_pro_bounds(n_classes: int) -> tuple[tuple[float, float], ...]:
    return ((0.0, math.log2(n_classes)), (0.0, 1.0), (0.01, 1.0), (1.0, 200.0))


def _params_from_vector(x: np.ndarray) -> ExplanationParams:
    return ExplanationParams(
        node_threshold=float(x[0]),
        rule_threshold=float(x[1]),
        merge_granularity=float(x[2]),
        group_cap=max(1, int(round(x[3]))),
    )


@dataclass(frozen=True)
class SearchReport:
    params: ExplanationParams
    score: float
    metrics: ExplanationMetrics | None
    trace: tuple[TracePoint, ...]
    extras: dict = field(default_factory=dict)


def opt_explain(
    model: EnsembleModel,
    data: Dataset,
    alpha: float = 0.9,
    pso: PsoConfig | None = None,
    rules: RuleSet | None = None,
    seed: int = 0,
) -> tuple[GroupedRuleSet, SearchReport]:
    """Search the pipeline parameters for the best fidelity/size balance,
    then return the winning explanation with its evaluation."""
    m = model.space.n_classes
    n = model.space.n_features
    if pso is None:
        pso = PsoConfig(bounds=default_opt_bounds(m), integer_dims=(3,), seed=seed)
    if rules is None:
        rules = extract_rules(model)
    simplifier = Simplifier(rules, model)
    truth = kernels.forest_classes(kernels.pack_forest(model), data.X)

    def metrics_of(result: SimpResult) -> ExplanationMetrics:
        contrib = result.contrib()
        scores, nsat = kernels.rule_scores(result.pack, data.X, contrib)
        classes = scores_to_classes(scores, nsat, fallback_class(contrib, m))
        accuracy = None
        if data.labels is not None:
            accuracy = float(np.mean(classes == data.labels))
        return ExplanationMetrics(
            fidelity=float(np.mean(classes == truth)),
            scale=result.scale,
            n_rows=data.n_rows,
            no_rule_rate=float(np.mean(nsat == 0)),
            accuracy=accuracy,
        )

    def fitness(x: np.ndarray) -> float:
        result = simplifier.run(_params_from_vector(x))
        return score_opt(metrics_of(result), alpha, m, n)

    pso_result = pso_optimize(fitness, pso)
    best_params = _params_from_vector(pso_result.best_params)
    best = simplifier.run(best_params)
    expl = simplifier.grouped(best)
    report = SearchReport(
        params=best_params,
        score=pso_result.best_score,
        metrics=metrics_of(best),
        trace=pso_result.trace,
        extras={"alpha": alpha, "fitness": "fidelity-size"},
    )
    return expl, report


def pro_explain_params(
    model: EnsembleModel,
    data: Dataset | None = None,
    pso: PsoConfig | None = None,
    rules: RuleSet | None = None,
    seed: int = 0,
) -> tuple[GroupedRuleSet, SearchReport]:
    """Search for the rule pool to feed the per-class profiler.

    Hard constraint: every class must own at least one group whose
    signature peaks at it; parameter vectors violating it score -inf.
    """
    m = model.space.n_classes
    if pso is None:
        pso = PsoConfig(bounds=default_pro_bounds(m), integer_dims=(3,), seed=seed)
    if rules is None:
        rules = extract_rules(model)
    simplifier = Simplifier(rules, model)

    def covered(result: SimpResult) -> bool:
        owners = {int(np.argmax(sig)) for sig in result.signatures}
        return owners >= set(range(m))

    def fitness(x: np.ndarray) -> float:
        result = simplifier.run(_params_from_vector(x))
        if result.n_rules == 0 or not covered(result):
            return -math.inf
        return float(_score_pro_raw(result.n_groups, result.scale, m))

    pso_result = pso_optimize(fitness, pso)
    if pso_result.best_score == -math.inf:
        raise InfeasibleSearchError(
            f"no searched parameters produced a group for every one of the {m} classes "
            f"({pso.n_particles} particles x {pso.n_iterations} iterations)"
        )
    best_params = _params_from_vector(pso_result.best_params)
    expl = simplifier.grouped(simplifier.run(best_params))
    report = SearchReport(
        params=best_params,
        score=pso_result.best_score,
        metrics=None,
        trace=pso_result.trace,
        extras={"fitness": "group-coverage"},
    )
    return expl, report
