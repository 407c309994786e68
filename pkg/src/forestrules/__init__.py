"""Global rule explanations for tree-ensemble classifiers.

Pipeline: extract one decision rule per branch of every tree, simplify the
set in four parameter-controlled stages, search the parameters with a
particle swarm, and optionally collapse each class into a single
profile rule via exact weighted MAX-SAT.
"""

from .errors import (
    ContradictionError,
    DataError,
    FitnessEvaluationError,
    ForestRulesError,
    InfeasibleSearchError,
    ModelFormatError,
    ModelValidationError,
)
from .evaluate import (
    ExplanationMetrics,
    evaluate_explanation,
    fidelity,
    predict_explanation,
    scale,
)
from .model import (
    Dataset,
    DecisionTreeModel,
    EnsembleModel,
    FeatureDecl,
    FeatureSpace,
    TreeNode,
    load_dataset,
    load_model,
    predict_ensemble,
    save_dataset,
    save_model,
)
from .optimize import (
    PsoConfig,
    opt_explain,
    pro_explain_params,
    pso_optimize,
    score_opt,
    score_pro,
)
from .profiles import ClassProfile, WeightedConjunct, build_profile, max_sat, profile_group
from .rules import (
    Conjunct,
    DecisionRule,
    RuleSet,
    extract_rules,
    merge_conjuncts,
    predict_ruleset,
    satisfies,
)
from .simplify import (
    ExplanationParams,
    GroupedRuleSet,
    Simplifier,
    class_signature,
    filter_nodes,
    node_quality,
    rule_quality,
    simp,
)
from .trainer import TrainConfig, split_dataset, train_forest

__version__ = "0.1.0"
