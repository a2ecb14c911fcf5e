"""Benchmark harness: intervention x model grid, scored at a fixed FPR ceiling."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from fado.dataset import Dataset, split_ordered
from fado.errors import FadoValidationError
from fado.evaluation.metrics import FAIRNESS_METRICS, confusion_rates, fairness_ratio, threshold_at_fpr
from fado.evaluation.pareto import pareto_frontier, rule80_winner
from fado.learners import LearnerSpec, fit, predict_proba
from fado.preprocess import InterventionResult, no_intervention, rps, rw, uar, uasp
from fado.utility import ALPHA_GRID, LINEAR, MIN_MAX, UtilityConfig, compute_utility
from fado.valuation import ValuationConfig, ValuationVector, value_dataset

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
UTILITY_AWARE = ("uasp", "uar")
BASELINES = ("none", "rps", "rw")


@dataclass(frozen=True)
class InterventionConfig:
    kind: str
    utility: UtilityConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in UTILITY_AWARE + BASELINES:
            raise FadoValidationError(f"unknown intervention {self.kind!r}")
        if self.kind in UTILITY_AWARE and self.utility is None:
            object.__setattr__(self, "utility", UtilityConfig())

    @property
    def name(self) -> str:
        if self.utility is None or self.kind not in UTILITY_AWARE:
            return self.kind
        u = self.utility
        scaling = f",{u.scaling}" if self.kind == "uar" else ""
        return f"{self.kind}[{u.kind},alpha={u.alpha:g}{scaling}]"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind in UTILITY_AWARE:
            out["utility"] = self.utility.to_dict()
        if self.kind == "rps":
            out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InterventionConfig":
        utility = data.get("utility")
        return cls(
            kind=data["kind"],
            utility=None if utility is None else UtilityConfig.from_dict(utility),
            seed=int(data.get("seed", 0)),
        )


def alpha_sweep(kind: str, alphas: Sequence[float] = ALPHA_GRID, utility_kind: str = LINEAR,
                scaling: str = MIN_MAX) -> list[InterventionConfig]:
    return [InterventionConfig(kind, UtilityConfig(utility_kind, alpha=a, scaling=scaling)) for a in alphas]


def default_interventions(seed: int = 0, alphas: Sequence[float] = ALPHA_GRID) -> list[InterventionConfig]:
    """No intervention, the two baselines, and UASP/UAR linear alpha sweeps."""
    return [
        InterventionConfig("none"),
        InterventionConfig("rps", seed=seed),
        InterventionConfig("rw"),
        *alpha_sweep("uasp", alphas),
        *alpha_sweep("uar", alphas),
    ]


@dataclass(frozen=True)
class EvalPoint:
    model_id: int
    intervention: str
    kind: str
    alpha: float | None
    performance: float
    fpr: float
    threshold: float
    fairness: Mapping[str, float]
    intervention_index: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "intervention": self.intervention,
            "intervention_index": self.intervention_index,
            "kind": self.kind,
            "alpha": self.alpha,
            "performance": self.performance,
            "fpr": self.fpr,
            "threshold": self.threshold,
            "fairness": dict(self.fairness),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalPoint":
        return cls(**{**data, "fairness": dict(data["fairness"])})


@dataclass(frozen=True)
class EvalReport:
    points: list[EvalPoint]
    pareto: Mapping[str, list[int]]
    rule80: Mapping[str, int | None]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "points": [p.to_dict() for p in self.points],
            "pareto": {m: list(v) for m, v in self.pareto.items()},
            "rule80_winner": dict(self.rule80),
            "config": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalReport":
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise FadoValidationError(f"unsupported report schema version {data.get('schema_version')!r}")
        return cls(
            points=[EvalPoint.from_dict(p) for p in data["points"]],
            pareto=data["pareto"],
            rule80=data["rule80_winner"],
            metadata=data.get("config", {}),
        )

    def write_points_csv(self, path: str | Path) -> None:
        metrics = list(self.pareto)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "intervention", "kind", "alpha", "model_id", "performance", "fpr",
                             "threshold", *metrics, *[f"pareto_{m}" for m in metrics]])
            for i, p in enumerate(self.points):
                writer.writerow([
                    i, p.intervention, p.kind, "" if p.alpha is None else repr(p.alpha), p.model_id,
                    repr(p.performance), repr(p.fpr), repr(p.threshold),
                    *[repr(p.fairness[m]) for m in metrics],
                    *[int(i in set(self.pareto[m])) for m in metrics],
                ])


def summarize(points: Sequence[EvalPoint], metrics: Sequence[str] = FAIRNESS_METRICS):
    """Pareto indices and 80%-rule winner index per fairness metric."""
    pareto, winners = {}, {}
    for m in metrics:
        pareto[m] = pareto_frontier([(p.performance, p.fairness[m]) for p in points])
        best = rule80_winner(points, m)
        winners[m] = None if best is None else next(i for i, p in enumerate(points) if p is best)
    return pareto, winners


def apply_intervention(
    cfg: InterventionConfig,
    train: Dataset,
    protected_column: str,
    valuations: ValuationVector | None,
) -> InterventionResult:
    if cfg.kind == "none":
        return no_intervention(train)
    if cfg.kind == "rps":
        return rps(train, protected_column, seed=cfg.seed)
    if cfg.kind == "rw":
        return rw(train, protected_column)
    if valuations is None:
        raise FadoValidationError(f"{cfg.name} needs valuations")
    util = compute_utility(valuations.v_y, valuations.v_z, cfg.utility, ids=valuations.ids)
    if cfg.kind == "uasp":
        return uasp(train, util, protected_column)
    return uar(train, util, scaling=cfg.utility.scaling)


def _evaluate_cell(spec, fit_data, weights, test, thresh_data, protected_column, fpr_target):
    model = fit(spec, fit_data.features, fit_data.target, weights)
    scores = predict_proba(model, test.features)
    if thresh_data is None:
        t = threshold_at_fpr(scores, test.target, fpr_target)
    else:
        t = threshold_at_fpr(predict_proba(model, thresh_data.features), thresh_data.target, fpr_target)
    preds = (scores >= t).astype(np.int8)
    rates = confusion_rates(preds, test.target)
    groups = test.groups(protected_column)
    fairness = {m: fairness_ratio(preds, test.target, groups, m) for m in FAIRNESS_METRICS}
    return rates["tpr"], rates["fpr"], t, fairness


def _guarded(context: str, fn, *args):
    try:
        return fn(*args)
    except FadoValidationError as exc:
        raise FadoValidationError(f"{context}: {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"{context}: {exc}") from exc


def evaluate_grid(
    train: Dataset,
    test: Dataset,
    grid: Sequence[LearnerSpec],
    weights: np.ndarray | None = None,
    fpr_target: float = 0.05,
    protected_column: str | None = None,
    name: str = "given",
    threads: int = 1,
) -> EvalReport:
    """Train every grid spec on an already-prepared (optionally weighted) set."""
    if train.feature_names != test.feature_names or set(train.protected) != set(test.protected):
        raise FadoValidationError("train and test do not share a schema")
    if not grid:
        raise FadoValidationError("the model grid is empty")
    protected_column = protected_column or next(iter(train.protected))
    w = np.ones(train.n) if weights is None else np.asarray(weights, dtype=np.float64)

    def run_cell(s):
        return _guarded(f"model {s}", _evaluate_cell, grid[s], train, w, test, None, protected_column, fpr_target)

    results = _ordered_map(run_cell, range(len(grid)), threads)
    points = [EvalPoint(s, name, "given", None, tpr, fpr, t, fair) for s, (tpr, fpr, t, fair) in enumerate(results)]
    pareto, winners = summarize(points)
    metadata = {
        "fpr_target": fpr_target,
        "protected_column": protected_column,
        "threshold_mode": "test",
        "grid": [g.to_dict() for g in grid],
        "weighted": weights is not None,
        "n_train": train.n,
        "n_test": test.n,
    }
    return EvalReport(points=points, pareto=pareto, rule80=winners, metadata=metadata)


def _ordered_map(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_benchmark(
    train: Dataset,
    test: Dataset,
    interventions: Sequence[InterventionConfig],
    grid: Sequence[LearnerSpec],
    fpr_target: float = 0.05,
    seed: int = 0,
    protected_column: str | None = None,
    valuation: ValuationConfig | None = None,
    valuations: ValuationVector | None = None,
    threads: int = 1,
    threshold_mode: str = "test",
    validation_fraction: float = 0.2,
) -> EvalReport:
    """Train every grid spec on every intervened training set and score on ``test``.

    The same specs are reused for every intervention. Valuations, when needed,
    are computed once on the (fit part of the) training set. With
    ``threshold_mode="validation"`` the tail of the training set is held out
    to choose thresholds instead of the test set.
    """
    if train.feature_names != test.feature_names or set(train.protected) != set(test.protected):
        raise FadoValidationError("train and test do not share a schema")
    if not grid:
        raise FadoValidationError("the model grid is empty")
    if not interventions:
        raise FadoValidationError("no interventions given")
    protected_column = protected_column or next(iter(train.protected))
    if threshold_mode not in ("test", "validation"):
        raise FadoValidationError(f"unknown threshold_mode {threshold_mode!r}")

    thresh_data = None
    fit_base = train
    if threshold_mode == "validation":
        fit_base, thresh_data = split_ordered(train, 1.0 - validation_fraction)

    if valuations is None and any(c.kind in UTILITY_AWARE for c in interventions):
        valuation = valuation or ValuationConfig(seed=seed)
        valuations = value_dataset(fit_base, valuation, threads=threads)
    if valuations is not None and not np.array_equal(valuations.ids, fit_base.ids):
        raise FadoValidationError("valuations are not aligned with the training rows")

    prepared = []
    for cfg in interventions:
        result = _guarded(cfg.name, apply_intervention, cfg, fit_base, protected_column, valuations)
        data, weights = result.apply(fit_base)
        prepared.append((cfg, data, weights))

    cells = [(i, s) for i in range(len(prepared)) for s in range(len(grid))]

    def run_cell(cell):
        i, s = cell
        cfg, data, weights = prepared[i]
        return _guarded(f"{cfg.name} / model {s}", _evaluate_cell, grid[s], data, weights, test, thresh_data,
                        protected_column, fpr_target)

    results = _ordered_map(run_cell, cells, threads)

    points = []
    for (i, s), (tpr, fpr, t, fair) in zip(cells, results):
        cfg = prepared[i][0]
        alpha = cfg.utility.alpha if cfg.kind in UTILITY_AWARE else None
        points.append(EvalPoint(s, cfg.name, cfg.kind, alpha, tpr, fpr, t, fair, intervention_index=i))
    pareto, winners = summarize(points)
    metadata = {
        "fpr_target": fpr_target,
        "seed": seed,
        "protected_column": protected_column,
        "threshold_mode": threshold_mode,
        "interventions": [c.to_dict() for c in interventions],
        "grid": [g.to_dict() for g in grid],
        "valuation": None if valuations is None or valuations.config is None else valuations.config.to_dict(),
        "n_train": train.n,
        "n_test": test.n,
    }
    return EvalReport(points=points, pareto=pareto, rule80=winners, metadata=metadata)
