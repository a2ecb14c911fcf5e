"""Weighted logistic regression fitted by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

_EPS = 1e-12


def loss_and_grad(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray]:
    """Weight-normalised log-loss and its gradient.

    ``params`` is ``[intercept, coef...]``; the intercept is not penalised.
    Dividing by the weight total makes the optimum invariant to rescaling
    all weights by a positive constant.
    """
    b, beta = params[0], params[1:]
    z = X @ beta + b
    wsum = w.sum()
    # log(1 + e^z) - y z, computed stably
    loss = np.sum(w * (np.logaddexp(0.0, z) - y * z)) / wsum + 0.5 * l2 * beta @ beta
    r = w * (expit(z) - y) / wsum
    grad = np.empty_like(params)
    grad[0] = r.sum()
    grad[1:] = X.T @ r + l2 * beta
    return float(loss), grad


@dataclass(frozen=True, eq=False)
class LogisticModel:
    coef: np.ndarray
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    spec: Any = None
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.coef)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), _EPS, 1.0 - _EPS)

    def to_dict(self) -> dict:
        return {
            "kind": "logistic_regression",
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, spec: Any = None) -> "LogisticModel":
        return cls(
            coef=np.asarray(data["coef"], dtype=np.float64),
            intercept=float(data["intercept"]),
            mean=np.asarray(data["mean"], dtype=np.float64),
            scale=np.asarray(data["scale"], dtype=np.float64),
            spec=spec,
        )


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    learning_rate: float = 0.5,
    epochs: int = 200,
    l2: float = 1e-4,
    spec: Any = None,
) -> LogisticModel:
    """Gradient descent on standardised features.

    Standardisation statistics are weighted means/deviations over rows with
    positive weight, so zero-weight rows never influence the fit.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    active = w > 0
    Xa, ya, wa = X[active], y[active], w[active]
    p = wa / wa.sum()
    mean = p @ Xa
    scale = np.sqrt(p @ (Xa - mean) ** 2)
    scale[scale < 1e-12] = 1.0
    Z = (Xa - mean) / scale

    prior = np.clip(p @ ya, _EPS, 1.0 - _EPS)
    params = np.zeros(X.shape[1] + 1)
    params[0] = np.log(prior / (1.0 - prior))
    for _ in range(int(epochs)):
        _, grad = loss_and_grad(params, Z, ya, wa, l2)
        params -= learning_rate * grad
    return LogisticModel(coef=params[1:].copy(), intercept=float(params[0]), mean=mean, scale=scale, spec=spec)
