"""Weighted binary classifiers behind a uniform fit / predict_proba contract."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union

import numpy as np

from fado.errors import FadoValidationError
from fado.learners.gbdt import BoostedTreesModel, fit_boosted_trees
from fado.learners.logistic import LogisticModel, fit_logistic, loss_and_grad

LOGISTIC = "logistic_regression"
TREES = "gradient_boosted_trees"
KINDS = (LOGISTIC, TREES)

# (low, high) of the log-uniform boosting grid
TREE_RANGES = {
    "n_estimators": (20, 10_000),
    "num_leaves": (10, 1_000),
    "min_child_samples": (5, 300),
    "max_depth": (2, 20),
    "learning_rate": (0.02, 0.5),
}
DESK_MAX_ESTIMATORS = 500

TREE_DEFAULTS = {
    "n_estimators": 100,
    "num_leaves": 31,
    "min_child_samples": 20,
    "max_depth": 6,
    "learning_rate": 0.1,
    "reg_lambda": 0.0,
    "min_sum_hessian": 1e-3,
    "max_bins": 64,
}
LOGISTIC_DEFAULTS = {"learning_rate": 1.0, "epochs": 300, "l2": 1e-4}

# logistic grid is not part of the boosting table; ranges chosen for standardised inputs
LOGISTIC_RANGES = {"learning_rate": (0.1, 2.0), "epochs": (50, 500), "l2": (1e-6, 1e-1)}

Model = Union[LogisticModel, BoostedTreesModel]
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LearnerSpec:
    """Learner family, hyperparameters and seed.

    Missing hyperparameters take the family defaults. Boosting
    hyperparameters named in ``TREE_RANGES`` must lie inside those ranges.
    """

    kind: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FadoValidationError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        defaults = TREE_DEFAULTS if self.kind == TREES else LOGISTIC_DEFAULTS
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise FadoValidationError(f"unknown {self.kind} hyperparameter(s): {sorted(unknown)}")
        merged = {**defaults, **self.hyperparameters}
        if self.kind == TREES:
            for name, (lo, hi) in TREE_RANGES.items():
                if not lo <= merged[name] <= hi:
                    raise FadoValidationError(f"{name}={merged[name]} outside [{lo}, {hi}]")
        else:
            if merged["learning_rate"] <= 0 or merged["epochs"] < 0 or merged["l2"] < 0:
                raise FadoValidationError(f"invalid logistic hyperparameters {merged}")
        object.__setattr__(self, "hyperparameters", dict(sorted(merged.items())))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LearnerSpec":
        return cls(kind=data["kind"], hyperparameters=dict(data.get("hyperparameters", {})), seed=int(data.get("seed", 0)))


def default_valuation_models() -> list[LearnerSpec]:
    """One logistic and one regularised boosting spec."""
    return [
        LearnerSpec(LOGISTIC),
        LearnerSpec(
            TREES,
            {"n_estimators": 100, "num_leaves": 31, "min_child_samples": 100, "max_depth": 5, "learning_rate": 0.05},
        ),
    ]


def _check_inputs(X, y, weights, allow_single_class):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise FadoValidationError("X must be a 2-D matrix")
    if y.shape != (X.shape[0],):
        raise FadoValidationError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.isin(y, (0, 1)).all():
        raise FadoValidationError("labels must be 0 or 1")
    if weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != y.shape:
            raise FadoValidationError(f"weights have shape {w.shape}, expected {y.shape}")
        if not np.isfinite(w).all():
            raise FadoValidationError("weights must be finite")
        if (w < 0).any():
            raise FadoValidationError("weights must be nonnegative")
    if not np.isfinite(X).all():
        raise FadoValidationError("X must be finite")
    active = w > 0
    classes = np.unique(y[active])
    if len(classes) == 0:
        raise FadoValidationError("no row has positive weight")
    if len(classes) < 2 and not allow_single_class:
        raise FadoValidationError(
            f"effective training set has a single class ({int(classes[0])}); both classes need positive weight"
        )
    return X, y.astype(np.float64), w


def fit(
    spec: LearnerSpec,
    X: np.ndarray,
    y: Sequence[int],
    weights: Sequence[float] | None = None,
    allow_single_class: bool = False,
) -> Model:
    """Fit ``spec`` on ``(X, y)`` with optional nonnegative row weights.

    Omitted weights mean all ones; zero-weight rows do not influence the fit.
    ``allow_single_class`` lets a one-class training set collapse to its
    prior instead of raising.
    """
    X, y, w = _check_inputs(X, y, weights, allow_single_class)
    hp = spec.hyperparameters
    if spec.kind == LOGISTIC:
        return fit_logistic(X, y, w, spec=spec, **hp)
    return fit_boosted_trees(X, y, w, spec=spec, **hp)


def predict_proba(model: Model, X: np.ndarray) -> np.ndarray:
    """Positive-class probabilities clamped to ``[1e-12, 1 - 1e-12]``."""
    try:
        return model.predict_proba(X)
    except ValueError as exc:
        raise FadoValidationError(str(exc)) from None


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def sample_grid(
    kind: str = TREES,
    n_models: int = 25,
    seed: int = 0,
    max_estimators: int = DESK_MAX_ESTIMATORS,
) -> list[LearnerSpec]:
    """Draw ``n_models`` distinct specs with log-uniform hyperparameters.

    For boosting, ``max_estimators`` caps the ``n_estimators`` range (the full
    table allows up to 10 000).
    """
    if n_models < 1:
        raise FadoValidationError("n_models must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == TREES:
        ranges = dict(TREE_RANGES)
        ranges["n_estimators"] = (ranges["n_estimators"][0], min(max_estimators, ranges["n_estimators"][1]))
        integer = {"n_estimators", "num_leaves", "min_child_samples", "max_depth"}
    elif kind == LOGISTIC:
        ranges = dict(LOGISTIC_RANGES)
        integer = {"epochs"}
    else:
        raise FadoValidationError(f"unknown learner kind {kind!r}")

    specs: list[LearnerSpec] = []
    seen = set()
    while len(specs) < n_models:
        hp = {}
        for name, (lo, hi) in ranges.items():
            value = _log_uniform(rng, lo, hi)
            hp[name] = int(min(max(round(value), lo), hi)) if name in integer else value
        key = tuple(sorted(hp.items()))
        model_seed = int(rng.integers(2**31 - 1))
        if key in seen:
            continue
        seen.add(key)
        specs.append(LearnerSpec(kind, hp, seed=model_seed))
    return specs


def model_to_json(model: Model) -> str:
    """Versioned JSON artifact for a fitted model."""
    payload = {"format_version": MODEL_FORMAT_VERSION, "model": model.to_dict()}
    if model.spec is not None:
        payload["spec"] = model.spec.to_dict()
    return json.dumps(payload, sort_keys=True)


def model_from_json(text: str) -> Model:
    payload = json.loads(text)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise FadoValidationError(f"unsupported model format version {payload.get('format_version')!r}")
    spec = LearnerSpec.from_dict(payload["spec"]) if "spec" in payload else None
    data = payload["model"]
    if data["kind"] == LOGISTIC:
        return LogisticModel.from_dict(data, spec=spec)
    return BoostedTreesModel.from_dict(data, spec=spec)


__all__ = [
    "BoostedTreesModel",
    "DESK_MAX_ESTIMATORS",
    "KINDS",
    "LOGISTIC",
    "LearnerSpec",
    "LogisticModel",
    "Model",
    "TREES",
    "TREE_RANGES",
    "default_valuation_models",
    "fit",
    "loss_and_grad",
    "model_from_json",
    "model_to_json",
    "predict_proba",
    "sample_grid",
]
