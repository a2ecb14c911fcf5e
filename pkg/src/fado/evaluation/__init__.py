"""Scoring, Pareto analysis and the benchmark harness."""

from fado.evaluation.benchmark import (
    EvalPoint,
    EvalReport,
    InterventionConfig,
    alpha_sweep,
    apply_intervention,
    default_interventions,
    evaluate_grid,
    run_benchmark,
    summarize,
)
from fado.evaluation.metrics import (
    DEMOGRAPHIC_PARITY,
    EQUAL_OPPORTUNITY,
    FAIRNESS_METRICS,
    PREDICTIVE_EQUALITY,
    confusion_rates,
    fairness_ratio,
    roc_auc,
    threshold_at_fpr,
)
from fado.evaluation.pareto import RULE80, pareto_frontier, rule80_winner

__all__ = [
    "DEMOGRAPHIC_PARITY",
    "EQUAL_OPPORTUNITY",
    "EvalPoint",
    "EvalReport",
    "FAIRNESS_METRICS",
    "InterventionConfig",
    "PREDICTIVE_EQUALITY",
    "RULE80",
    "alpha_sweep",
    "apply_intervention",
    "confusion_rates",
    "default_interventions",
    "evaluate_grid",
    "fairness_ratio",
    "pareto_frontier",
    "roc_auc",
    "rule80_winner",
    "run_benchmark",
    "summarize",
    "threshold_at_fpr",
]
