"""Synthetic binary-classification data with controllable group bias.

Rows are generated as

* group ``z`` drawn from ``group_fractions``,
* label ``y ~ Bernoulli(group_prevalences[z])``,
* features ``x ~ N(class_separation * y, I)``, and for the columns listed in
  ``shifted_features`` an extra mean offset ``conditional_shift[z][y]``.
  ``class_separation`` is a scalar or one value per feature.

Unequal prevalences give a prevalence disparity; a nonzero
``conditional_shift`` makes the class-conditional feature distribution
depend on the group. Both make ``Z`` predictable from ``(X, Y)``.

This is a stand-in for proprietary data, not a reproduction of any real set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from fado.dataset import Dataset
from fado.errors import FadoValidationError


@dataclass(frozen=True)
class BiasSpec:
    n_rows: int = 20_000
    n_features: int = 10
    group_fractions: tuple[float, ...] = (0.5, 0.5)
    group_prevalences: tuple[float, ...] = (0.01, 0.01)
    conditional_shift: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.0, 0.0))
    shifted_features: tuple[int, ...] = (0, 1)
    class_separation: float | tuple[float, ...] = 1.0
    group_names: tuple[str, ...] | None = None
    protected_name: str = "z"
    include_protected: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("group_fractions", "group_prevalences", "shifted_features"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "conditional_shift", tuple(tuple(float(v) for v in row) for row in self.conditional_shift))
        if self.group_names is not None:
            object.__setattr__(self, "group_names", tuple(str(g) for g in self.group_names))
        if not np.isscalar(self.class_separation):
            object.__setattr__(self, "class_separation", tuple(float(v) for v in self.class_separation))
        self.validate()

    @property
    def n_groups(self) -> int:
        return len(self.group_fractions)

    def names(self) -> tuple[str, ...]:
        if self.group_names is not None:
            return self.group_names
        return tuple(chr(ord("A") + g) for g in range(self.n_groups))

    def validate(self) -> None:
        k = self.n_groups
        if k < 2:
            raise FadoValidationError("need at least two groups")
        if self.n_features < 2:
            raise FadoValidationError("n_features must be >= 2")
        if self.n_rows < 2:
            raise FadoValidationError("n_rows must be >= 2")
        if abs(sum(self.group_fractions) - 1.0) > 1e-9:
            raise FadoValidationError(f"group_fractions must sum to 1, got {sum(self.group_fractions)}")
        if any(f < 0 for f in self.group_fractions):
            raise FadoValidationError("group_fractions must be nonnegative")
        if len(self.group_prevalences) != k or len(self.conditional_shift) != k:
            raise FadoValidationError("group_prevalences and conditional_shift need one entry per group")
        if any(not 0.0 < p < 1.0 for p in self.group_prevalences):
            raise FadoValidationError("group_prevalences must lie in (0, 1)")
        if any(len(row) != 2 for row in self.conditional_shift):
            raise FadoValidationError("conditional_shift rows must be (negative-class shift, positive-class shift)")
        if any(not 0 <= j < self.n_features for j in self.shifted_features):
            raise FadoValidationError("shifted_features index out of range")
        if not np.isscalar(self.class_separation) and len(self.class_separation) != self.n_features:
            raise FadoValidationError("class_separation needs a scalar or one value per feature")
        if self.group_names is not None and len(self.group_names) != k:
            raise FadoValidationError("group_names needs one entry per group")
        for g, frac in enumerate(self.group_fractions):
            if self.n_rows * frac < 1.0:
                raise FadoValidationError(f"group {self.names()[g]!r} has an expected size below one row")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BiasSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise FadoValidationError(f"unknown BiasSpec field(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "BiasSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        return json.loads(json.dumps(asdict(self)))


def generate(spec: BiasSpec) -> Dataset:
    """Draw a dataset from ``spec``; identical specs give identical data."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_rows, spec.n_features
    z = rng.choice(spec.n_groups, size=n, p=np.asarray(spec.group_fractions, dtype=np.float64))
    prev = np.asarray(spec.group_prevalences, dtype=np.float64)
    y = (rng.random(n) < prev[z]).astype(np.int8)
    sep = np.broadcast_to(np.asarray(spec.class_separation, dtype=np.float64), (d,))
    X = rng.standard_normal((n, d)) + y[:, None] * sep[None, :]
    shift = np.asarray(spec.conditional_shift, dtype=np.float64)
    cols = list(spec.shifted_features)
    if cols:
        X[:, cols] += shift[z, y][:, None]
    names = spec.names()
    return Dataset.from_arrays(
        X,
        y,
        protected={spec.protected_name: [names[g] for g in z]},
        include_protected=spec.include_protected,
    )
