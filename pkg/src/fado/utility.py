"""Combining target and protected-attribute valuations into utilities.

Utility kinds, with ``a`` the performance weight:

* ``linear``          ``a*v_y + (1-a)*v_z``, or ``a*v_y + sum_j b_j*v_z_j`` with betas
* ``multiplicative``  ``v_y**a * v_z**(1-a)`` with ``0**0 == 1``
* ``subtractive``     ``a*v_y - (1-a)*v_z``

With several protected columns and no betas, ``linear`` and ``subtractive``
use the mean of the ``v_z`` columns and ``multiplicative`` splits the
exponent ``1-a`` evenly across them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from fado.errors import FadoValidationError

LINEAR = "linear"
MULTIPLICATIVE = "multiplicative"
SUBTRACTIVE = "subtractive"
KINDS = (LINEAR, MULTIPLICATIVE, SUBTRACTIVE)
MIN_MAX = "min_max"
NO_SCALING = "none"
SCALINGS = (MIN_MAX, NO_SCALING)
ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass(frozen=True)
class UtilityConfig:
    kind: str = LINEAR
    alpha: float = 0.5
    betas: tuple[float, ...] | None = None
    scaling: str = MIN_MAX
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FadoValidationError(f"unknown utility kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise FadoValidationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.scaling not in SCALINGS:
            raise FadoValidationError(f"unknown scaling {self.scaling!r}; expected one of {SCALINGS}")
        if self.betas is not None:
            object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
            if self.kind != LINEAR:
                raise FadoValidationError("betas are only defined for the linear utility")
            if any(b < 0 for b in self.betas):
                raise FadoValidationError("betas must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "betas": None if self.betas is None else list(self.betas),
            "scaling": self.scaling,
            "normalize": self.normalize,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UtilityConfig":
        return cls(**dict(data))


@dataclass(frozen=True, eq=False)
class UtilityVector:
    ids: np.ndarray
    U: np.ndarray
    config: UtilityConfig


def _as_columns(vz) -> list[np.ndarray]:
    if isinstance(vz, Mapping):
        return [np.asarray(v, dtype=np.float64) for v in vz.values()]
    arr = np.asarray(vz, dtype=np.float64)
    if arr.ndim == 1:
        return [arr]
    return [arr[j] for j in range(arr.shape[0])]


def compute_utility(
    vy: Sequence[float],
    vz: Sequence[float] | Mapping[str, Sequence[float]],
    cfg: UtilityConfig,
    ids: Sequence[Any] | None = None,
) -> UtilityVector:
    """Elementwise utility of each instance.

    ``vz`` is a single vector or a mapping of protected column to vector.
    """
    vy = np.asarray(vy, dtype=np.float64)
    cols = _as_columns(vz)
    if any(c.shape != vy.shape for c in cols):
        raise FadoValidationError("v_y and v_z vectors are not aligned")
    a = cfg.alpha
    if cfg.kind == LINEAR:
        if cfg.betas is not None:
            if len(cfg.betas) != len(cols):
                raise FadoValidationError(f"got {len(cfg.betas)} betas for {len(cols)} protected column(s)")
            betas = np.asarray(cfg.betas)
            if cfg.normalize:
                total = a + betas.sum()
                if total <= 0:
                    raise FadoValidationError("alpha + sum(betas) must be positive to normalise")
                a, betas = a / total, betas / total
            U = a * vy + sum(b * c for b, c in zip(betas, cols))
        else:
            U = a * vy + (1.0 - a) * np.mean(cols, axis=0)
    elif cfg.kind == SUBTRACTIVE:
        U = a * vy - (1.0 - a) * np.mean(cols, axis=0)
    else:
        if (vy < 0).any() or any((c < 0).any() for c in cols):
            raise FadoValidationError("multiplicative utility needs nonnegative valuations")
        # numpy already gives 0.0**0.0 == 1.0
        U = vy**a
        for c in cols:
            U = U * c ** ((1.0 - a) / len(cols))
    if not np.isfinite(U).all():
        raise FadoValidationError("utility is not finite")
    return UtilityVector(ids=np.arange(len(vy)) if ids is None else np.asarray(ids), U=U, config=cfg)


def min_max_scale(u: Sequence[float]) -> np.ndarray:
    """Rescale to ``[0, 1]``; a constant vector maps to all ones."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        raise FadoValidationError("cannot scale an empty vector")
    if not np.isfinite(u).all():
        raise FadoValidationError("cannot scale non-finite values")
    lo, hi = u.min(), u.max()
    if hi == lo:
        return np.ones_like(u)
    return (u - lo) / (hi - lo)
