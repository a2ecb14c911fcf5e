"""Thresholding at a false-positive-rate ceiling and group fairness ratios."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from fado.errors import FadoValidationError

PREDICTIVE_EQUALITY = "predictive_equality"
EQUAL_OPPORTUNITY = "equal_opportunity"
DEMOGRAPHIC_PARITY = "demographic_parity"
FAIRNESS_METRICS = (PREDICTIVE_EQUALITY, EQUAL_OPPORTUNITY, DEMOGRAPHIC_PARITY)


def _max_false_positives(n_neg: int, fpr_target: float) -> int:
    """Largest m with ``m / n_neg <= fpr_target`` under float division."""
    m = min(math.floor(fpr_target * n_neg), n_neg)
    while m + 1 <= n_neg and (m + 1) / n_neg <= fpr_target:
        m += 1
    while m > 0 and m / n_neg > fpr_target:
        m -= 1
    return m


def threshold_at_fpr(scores: Sequence[float], labels: Sequence[int], fpr_target: float) -> float:
    """Smallest threshold ``t`` whose rule ``score >= t`` keeps FPR within the target.

    Candidates are the distinct scores plus the next float above the maximum
    score (which flags nothing). Between candidates the predictions do not
    change, so this is the smallest useful threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise FadoValidationError("scores and labels are not aligned")
    if not 0.0 < fpr_target < 1.0:
        raise FadoValidationError(f"fpr_target must lie in (0, 1), got {fpr_target}")
    neg = np.sort(s[y == 0])[::-1]
    if len(neg) == 0:
        raise FadoValidationError("no negatives: false positive rate undefined")
    if not (y == 1).any():
        raise FadoValidationError("no positives: true positive rate undefined")
    m = _max_false_positives(len(neg), fpr_target)
    if m >= len(neg):
        return float(s.min())
    # every admissible threshold lies strictly above the (m+1)-th largest negative
    bound = neg[m]
    above = s[s > bound]
    if len(above):
        return float(above.min())
    return float(np.nextafter(s.max(), np.inf))


def confusion_rates(preds: Sequence[int], labels: Sequence[int]) -> dict[str, float]:
    """TPR, FPR, FNR and predicted-positive rate; NaN where undefined."""
    p = np.asarray(preds).astype(bool)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    tp = int((p & y).sum())
    fp = int((p & ~y).sum())
    return {
        "tpr": tp / n_pos if n_pos else float("nan"),
        "fnr": (n_pos - tp) / n_pos if n_pos else float("nan"),
        "fpr": fp / n_neg if n_neg else float("nan"),
        "ppr": float(p.mean()) if len(p) else float("nan"),
    }


_RATE = {PREDICTIVE_EQUALITY: "fpr", EQUAL_OPPORTUNITY: "fnr", DEMOGRAPHIC_PARITY: "ppr"}


def group_rates(preds, labels, groups, metric: str) -> dict[int, float]:
    if metric not in _RATE:
        raise FadoValidationError(f"unknown fairness metric {metric!r}; expected one of {FAIRNESS_METRICS}")
    preds, labels, groups = np.asarray(preds), np.asarray(labels), np.asarray(groups)
    rates = {}
    for g in np.unique(groups):
        mask = groups == g
        rate = confusion_rates(preds[mask], labels[mask])[_RATE[metric]]
        if math.isnan(rate):
            need = {"fpr": "negatives", "fnr": "positives", "ppr": "rows"}[_RATE[metric]]
            raise FadoValidationError(f"group {g!r} has no {need}; {metric} is undefined")
        rates[g.item() if hasattr(g, "item") else g] = rate
    return rates


def fairness_ratio(preds, labels, groups, metric: str) -> float:
    """``min/max`` of the two groups' FPR, FNR or predicted-positive rate.

    1.0 is parity; if both rates are zero the ratio is 1.
    """
    rates = group_rates(preds, labels, groups, metric)
    if len(rates) != 2:
        raise FadoValidationError(f"fairness ratios need exactly 2 groups, found {len(rates)}")
    a, b = rates.values()
    hi = max(a, b)
    if hi == 0:
        return 1.0
    return min(a, b) / hi


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise FadoValidationError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
