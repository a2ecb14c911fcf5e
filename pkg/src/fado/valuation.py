"""Entropy-based instance valuation toward the target or a protected attribute.

Two estimators are provided. The out-of-bag estimator fits every model on
the in-bag part of several random bags and scores the held-out rows; the
in-bag estimator fits on the full data and scores the same rows. In both,
an instance's value is its binary prediction entropy averaged over all fits
that scored it.

Predicting a protected attribute ``z`` uses the remaining features plus the
target as inputs, i.e. it estimates ``P[Z | X, Y]``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from fado.dataset import Dataset
from fado.errors import FadoValidationError
from fado.learners import LearnerSpec, default_valuation_models, fit, predict_proba

logger = logging.getLogger(__name__)

OUT_OF_BAG = "out_of_bag"
IN_BAG = "in_bag"
ALGORITHMS = (OUT_OF_BAG, IN_BAG)
TARGET = "target"


def prediction_entropy(p):
    """Binary Shannon entropy in bits, ``-[p log2 p + (1-p) log2 (1-p)]``.

    Accepts a scalar or an array; ``0 log 0`` is taken as 0.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any():
        raise FadoValidationError("probabilities must lie in [0, 1]")
    q = 1.0 - arr
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(arr > 0, arr * np.log2(np.where(arr > 0, arr, 1.0)), 0.0)
        b = np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    out = -(a + b)
    # -0.0 at the endpoints
    out = out + 0.0
    if np.ndim(p) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ValuationConfig:
    algorithm: str = OUT_OF_BAG
    n_bags: int = 5
    pct_unseen: float = 0.2
    models: tuple[LearnerSpec, ...] = field(default_factory=lambda: tuple(default_valuation_models()))
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if self.algorithm not in ALGORITHMS:
            raise FadoValidationError(f"unknown valuation algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.models:
            raise FadoValidationError("at least one model is required")
        if self.algorithm == OUT_OF_BAG:
            if self.n_bags < 1:
                raise FadoValidationError("n_bags must be >= 1")
            if not 0.0 < self.pct_unseen < 1.0:
                raise FadoValidationError(f"pct_unseen must lie in (0, 1), got {self.pct_unseen}")
            if self.n_bags * self.pct_unseen < 1.0:
                raise FadoValidationError(
                    f"n_bags * pct_unseen = {self.n_bags * self.pct_unseen:g} < 1: bags cannot cover every row"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "n_bags": self.n_bags,
            "pct_unseen": self.pct_unseen,
            "models": [m.to_dict() for m in self.models],
            "seed": self.seed,
            "stratify": self.stratify,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ValuationConfig":
        data = dict(data)
        if "models" in data and data["models"] is not None:
            data["models"] = tuple(LearnerSpec.from_dict(m) for m in data["models"])
        else:
            data.pop("models", None)
        return cls(**data)


@dataclass(frozen=True, eq=False)
class BagAssignment:
    in_bag: tuple[np.ndarray, ...]
    out_of_bag: tuple[np.ndarray, ...]

    def coverage(self, n: int) -> np.ndarray:
        """Number of bags in which each row is out-of-bag."""
        counts = np.zeros(n, dtype=np.int64)
        for oob in self.out_of_bag:
            counts[oob] += 1
        return counts


def make_bags(n: int, cfg: ValuationConfig, labels: Sequence[int] | None = None) -> BagAssignment:
    """Draw ``cfg.n_bags`` in/out-of-bag splits covering every row out-of-bag.

    Each out-of-bag set has ``floor(n * pct_unseen)`` distinct rows. A random
    permutation is first dealt round-robin across the bags, which guarantees
    coverage; the remaining out-of-bag capacity is filled uniformly from rows
    not yet in that bag. With ``cfg.stratify`` the permutation is ordered by
    class so each bag receives a near-equal share of every class.
    """
    size = math.floor(n * cfg.pct_unseen)
    if size < 1:
        raise FadoValidationError(f"pct_unseen={cfg.pct_unseen} leaves an empty out-of-bag set for n={n}")
    if size >= n:
        raise FadoValidationError(f"pct_unseen={cfg.pct_unseen} leaves an empty in-bag set for n={n}")
    if cfg.n_bags * size < n:
        raise FadoValidationError(
            f"{cfg.n_bags} bags of {size} out-of-bag rows cannot cover n={n} rows"
        )
    rng = np.random.default_rng(cfg.seed)
    if cfg.stratify and labels is not None:
        labels = np.asarray(labels)
        perm = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    else:
        perm = rng.permutation(n)
    in_bags, out_bags = [], []
    for b in range(cfg.n_bags):
        dealt = perm[b :: cfg.n_bags]
        mask = np.zeros(n, dtype=bool)
        mask[dealt] = True
        extra = size - len(dealt)
        if extra > 0:
            mask[rng.choice(np.flatnonzero(~mask), size=extra, replace=False)] = True
        out_bags.append(np.flatnonzero(mask))
        in_bags.append(np.flatnonzero(~mask))
    return BagAssignment(tuple(in_bags), tuple(out_bags))


def design_for(d: Dataset, var: str) -> tuple[np.ndarray, np.ndarray]:
    """Inputs and binary labels for predicting ``var`` (``"target"`` or a protected column)."""
    if var == TARGET or var == d.target_name and var not in d.protected:
        return d.features, d.target.astype(np.int64)
    if var not in d.protected:
        raise FadoValidationError(f"unknown variable {var!r}: expected 'target' or one of {list(d.protected)}")
    codes = d.protected[var]
    if codes.max() > 1:
        raise FadoValidationError(f"protected column {var!r} has more than two groups; only binary entropy is supported")
    X = np.column_stack([d.design_matrix(drop=[var]), d.target.astype(np.float64)])
    return X, codes


def _check_both_classes(labels: np.ndarray, var: str) -> None:
    if len(np.unique(labels)) < 2:
        raise FadoValidationError(f"variable {var!r} has a single class; entropy valuation needs both")


def _score(spec: LearnerSpec, X, y, fit_rows, score_rows) -> np.ndarray:
    model = fit(spec, X[fit_rows], y[fit_rows])
    return prediction_entropy(predict_proba(model, X[score_rows]))


def _run(tasks, threads: int):
    if threads <= 1:
        return [fn(*args) for fn, args in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *args) for fn, args in tasks]
        return [f.result() for f in futures]


def _oob_many(d: Dataset, variables: Sequence[str], cfg: ValuationConfig, threads: int,
              bags: BagAssignment | None = None) -> dict[str, np.ndarray]:
    designs = {}
    for var in variables:
        designs[var] = design_for(d, var)
        _check_both_classes(designs[var][1], var)
    if bags is None:
        bags = make_bags(d.n, cfg, labels=d.target if cfg.stratify else None)
    cov = bags.coverage(d.n)
    if (cov < 1).any():
        raise FadoValidationError(f"bag assignment leaves row id {d.ids[np.argmin(cov)]!r} uncovered")

    tasks, keys = [], []
    for var in variables:
        X, y = designs[var]
        for b, (inb, oob) in enumerate(zip(bags.in_bag, bags.out_of_bag)):
            if len(np.unique(y[inb])) < 2:
                warnings.warn(f"{var}: bag {b} in-bag set has a single class; skipping its {len(cfg.models)} fit(s)")
                continue
            for m, spec in enumerate(cfg.models):
                tasks.append((_score, (spec, X, y, inb, oob)))
                keys.append((var, b))
    results = _run(tasks, threads)

    out = {}
    for var in variables:
        total = np.zeros(d.n)
        count = np.zeros(d.n, dtype=np.int64)
        # fixed (bag, model) order keeps the sums bitwise reproducible
        for (v, b), ent in zip(keys, results):
            if v != var:
                continue
            oob = bags.out_of_bag[b]
            total[oob] += ent
            count[oob] += 1
        if (count == 0).any():
            row = int(np.argmax(count == 0))
            raise FadoValidationError(f"{var}: row id {d.ids[row]!r} received no out-of-bag valuation")
        out[var] = total / count
    return out


def _in_bag_many(d: Dataset, variables: Sequence[str], cfg: ValuationConfig, threads: int) -> dict[str, np.ndarray]:
    tasks = []
    everything = np.arange(d.n)
    for var in variables:
        X, y = design_for(d, var)
        _check_both_classes(y, var)
        for spec in cfg.models:
            tasks.append((_score, (spec, X, y, everything, everything)))
    results = _run(tasks, threads)
    out, k = {}, 0
    for var in variables:
        total = np.zeros(d.n)
        for _ in cfg.models:
            total += results[k]
            k += 1
        out[var] = total / len(cfg.models)
    return out


def out_of_bag_valuation(d: Dataset, var: str, cfg: ValuationConfig | None = None, threads: int = 1,
                         bags: BagAssignment | None = None) -> np.ndarray:
    """Per-row mean out-of-bag prediction entropy for ``var``."""
    cfg = cfg or ValuationConfig()
    return _oob_many(d, [var], cfg, threads, bags)[var]


def in_bag_valuation(d: Dataset, var: str, cfg: ValuationConfig | None = None, threads: int = 1) -> np.ndarray:
    """Per-row mean in-sample prediction entropy for ``var`` over ``cfg.models``."""
    cfg = cfg or ValuationConfig(algorithm=IN_BAG)
    return _in_bag_many(d, [var], cfg, threads)[var]


@dataclass(frozen=True, eq=False)
class ValuationVector:
    """Per-instance target valuation ``v_y`` and protected valuations ``v_z``."""

    ids: np.ndarray
    v_y: np.ndarray
    v_z: Mapping[str, np.ndarray]
    config: ValuationConfig | None = None

    def __post_init__(self):
        n = len(self.ids)
        for name, arr in [("v_y", self.v_y), *self.v_z.items()]:
            arr = np.asarray(arr)
            if arr.shape != (n,):
                raise FadoValidationError(f"{name} is not aligned with ids")
            if not np.isfinite(arr).all():
                raise FadoValidationError(f"{name} has non-finite values")

    def to_csv(self, path: str | Path, utility: Sequence[float] | None = None, id_name: str = "id") -> None:
        cols = list(self.v_z)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = [id_name, "v_y", *[f"v_z_{c}" for c in cols]]
            if utility is not None:
                header.append("utility")
            writer.writerow(header)
            for i, ident in enumerate(self.ids.tolist()):
                row = [ident, repr(float(self.v_y[i]))] + [repr(float(self.v_z[c][i])) for c in cols]
                if utility is not None:
                    row.append(repr(float(utility[i])))
                writer.writerow(row)

    def write_sidecar(self, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
        payload = {"valuation_config": None if self.config is None else self.config.to_dict()}
        payload.update(extra or {})
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "ValuationVector":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
        if len(header) < 2 or header[1] != "v_y":
            raise FadoValidationError(f"{path}: expected columns id,v_y,v_z_<column>...")
        zcols = [h for h in header if h.startswith("v_z_")]
        raw_ids = [r[0] for r in rows]
        try:
            ids = np.array([int(s) for s in raw_ids], dtype=np.int64)
        except ValueError:
            ids = np.array(raw_ids, dtype=object)
        vy = np.array([float(r[1]) for r in rows])
        vz = {h[4:]: np.array([float(r[header.index(h)]) for r in rows]) for h in zcols}
        return cls(ids=ids, v_y=vy, v_z=vz)


def value_dataset(
    d: Dataset,
    cfg: ValuationConfig | None = None,
    protected_columns: Sequence[str] | None = None,
    threads: int = 1,
) -> ValuationVector:
    """Valuations toward the target and each protected column.

    All variables share one bag assignment, as required for combining them
    into utilities.
    """
    cfg = cfg or ValuationConfig()
    cols = list(d.protected) if protected_columns is None else list(protected_columns)
    variables = [TARGET, *cols]
    if cfg.algorithm == OUT_OF_BAG:
        values = _oob_many(d, variables, cfg, threads)
    else:
        values = _in_bag_many(d, variables, cfg, threads)
    logger.info("valued %d rows toward %s", d.n, variables)
    return ValuationVector(ids=d.ids, v_y=values[TARGET], v_z={c: values[c] for c in cols}, config=cfg)
