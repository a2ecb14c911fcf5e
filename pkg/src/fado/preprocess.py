"""Training-set interventions: utility-aware sampling/reweighing and baselines.

* ``uasp``  drop negatives of the lower-prevalence group, least utility first,
  until both groups have the same positive rate
* ``rps``   the same count of drops, in random order
* ``uar``   weight every row by its (optionally min-max scaled) utility
* ``rw``    expected-over-observed cell weights ``|z| |y| / (n |z, y|)``
* ``none``  identity
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from fado.dataset import Dataset
from fado.errors import FadoValidationError
from fado.utility import MIN_MAX, NO_SCALING, UtilityVector, min_max_scale

logger = logging.getLogger(__name__)

KINDS = ("uasp", "uar", "rps", "rw", "none")


@dataclass(frozen=True, eq=False)
class InterventionResult:
    kind: str
    kept_ids: np.ndarray
    weights: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def apply(self, train: Dataset) -> tuple[Dataset, np.ndarray]:
        """The kept rows of ``train`` (in original order) and their weights."""
        return train.subset(train.positions(self.kept_ids)), self.weights


def no_intervention(train: Dataset) -> InterventionResult:
    return InterventionResult("none", train.ids.copy(), np.ones(train.n), {})


def _aligned_utilities(train: Dataset, utilities: UtilityVector) -> np.ndarray:
    U = np.asarray(utilities.U, dtype=np.float64)
    if U.shape != (train.n,):
        raise FadoValidationError(f"utilities have {U.size} entries for {train.n} training rows")
    if not np.array_equal(np.asarray(utilities.ids), train.ids):
        raise FadoValidationError("utility ids are not aligned with the training rows")
    return U


def removal_count(pos_low: int, rows_low: int, prev_high: float) -> int:
    """Negatives to drop from the low-prevalence group to reach ``prev_high``.

    Solving ``pos_low / (rows_low - k) = prev_high`` gives
    ``k* = rows_low - pos_low / prev_high``; ``k`` is ``k*`` rounded up, so the
    group's rate reaches the target and overshoots by less than one row.
    """
    exact = rows_low - pos_low / prev_high
    k = math.ceil(exact - 1e-9 * max(1.0, abs(exact)))
    return int(min(max(k, 0), rows_low - pos_low))


def _prevalence_plan(train: Dataset, protected_column: str) -> tuple[np.ndarray, int]:
    """Candidate negatives of the low-prevalence group and how many to drop."""
    codes = train.groups(protected_column)
    groups = np.unique(codes)
    if len(groups) != 2:
        raise FadoValidationError(
            f"prevalence sampling needs exactly 2 groups in {protected_column!r}, found {len(groups)}"
        )
    y = train.target
    stats = []
    for g in groups:
        mask = codes == g
        stats.append((int(y[mask].sum()), int(mask.sum())))
    prev = [p / r for p, r in stats]
    if prev[0] == prev[1]:
        return np.empty(0, dtype=np.int64), 0
    low = int(np.argmin(prev))
    high = 1 - low
    pos_low, rows_low = stats[low]
    if pos_low == 0:
        label = train.group_labels[protected_column][groups[low]]
        raise FadoValidationError(f"group {label!r} has no positives; its prevalence cannot be raised")
    k = removal_count(pos_low, rows_low, prev[high])
    candidates = np.flatnonzero((codes == groups[low]) & (y == 0))
    return candidates, k


def _drop(train: Dataset, drop_rows: np.ndarray, kind: str, provenance: dict) -> InterventionResult:
    keep = np.ones(train.n, dtype=bool)
    keep[drop_rows] = False
    kept = train.ids[keep]
    provenance = {**provenance, "removed": int(len(drop_rows))}
    logger.info("%s removed %d of %d rows", kind, len(drop_rows), train.n)
    return InterventionResult(kind, kept, np.ones(len(kept)), provenance)


def uasp(train: Dataset, utilities: UtilityVector, protected_column: str) -> InterventionResult:
    """Utility-aware prevalence sampling; ties in utility go to the smaller id."""
    U = _aligned_utilities(train, utilities)
    candidates, k = _prevalence_plan(train, protected_column)
    id_rank = np.argsort(np.argsort(train.ids[candidates], kind="stable"), kind="stable")
    order = candidates[np.lexsort((id_rank, U[candidates]))]
    prov = {"protected_column": protected_column, "utility": utilities.config.to_dict()}
    return _drop(train, order[:k], "uasp", prov)


def rps(train: Dataset, protected_column: str, seed: int = 0) -> InterventionResult:
    """Random prevalence sampling, reproducible for a given seed."""
    candidates, k = _prevalence_plan(train, protected_column)
    order = np.random.default_rng(seed).permutation(candidates)
    return _drop(train, order[:k], "rps", {"protected_column": protected_column, "seed": seed})


def uar(train: Dataset, utilities: UtilityVector, scaling: str = MIN_MAX) -> InterventionResult:
    """Utility-aware reweighing over the full training set."""
    U = _aligned_utilities(train, utilities)
    if scaling == MIN_MAX:
        w = min_max_scale(U)
    elif scaling == NO_SCALING:
        w = np.maximum(U, 0.0)
    else:
        raise FadoValidationError(f"unknown scaling {scaling!r}")
    if not (w > 0).any():
        raise FadoValidationError("all reweighing weights are zero")
    prov = {"scaling": scaling, "utility": utilities.config.to_dict()}
    return InterventionResult("uar", train.ids.copy(), w, prov)


def rw(train: Dataset, protected_column: str) -> InterventionResult:
    """Reweighing so that group membership and label look independent."""
    codes = train.groups(protected_column)
    y = train.target
    n = train.n
    w = np.empty(n)
    for g in np.unique(codes):
        in_g = codes == g
        for label in (0, 1):
            cell = in_g & (y == label)
            c = int(cell.sum())
            if c == 0:
                name = train.group_labels[protected_column][g]
                raise FadoValidationError(f"group {name!r} has no rows with label {label}; reweighing undefined")
            w[cell] = in_g.sum() * (y == label).sum() / (n * c)
    return InterventionResult("rw", train.ids.copy(), w, {"protected_column": protected_column})
