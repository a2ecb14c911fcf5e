"""Tabular dataset container, CSV I/O, ordered splitting and group statistics."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from fado.errors import FadoValidationError, ParseError, SchemaError


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles for a CSV file.

    ``feature_columns`` defaults to every column that is not the target, the
    id or a protected column. Protected columns are appended to the feature
    matrix (in header order) unless ``include_protected`` is False.
    ``ignore_columns`` are not read at all (for example a ``weight`` column).
    """

    target_column: str
    protected_columns: tuple[str, ...]
    id_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    include_protected: bool = True
    ignore_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "protected_columns", tuple(self.protected_columns))
        object.__setattr__(self, "ignore_columns", tuple(self.ignore_columns))
        if self.feature_columns is not None:
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if not self.protected_columns:
            raise SchemaError("at least one protected column is required")
        roles = [self.target_column, *self.protected_columns]
        if self.id_column is not None:
            roles.append(self.id_column)
        if len(set(roles)) != len(roles):
            raise SchemaError(f"target, protected and id columns must be disjoint, got {roles}")
        if self.feature_columns is not None:
            clash = set(self.feature_columns) & {self.target_column, self.id_column}
            if clash:
                raise SchemaError(f"feature columns overlap target/id: {sorted(c for c in clash if c)}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetSchema":
        protected = data.get("protected_columns", data.get("protected"))
        if isinstance(protected, str):
            protected = [protected]
        target = data.get("target_column", data.get("target"))
        if target is None:
            raise SchemaError("schema needs a target column")
        return cls(
            target_column=target,
            protected_columns=tuple(protected or ()),
            id_column=data.get("id_column", data.get("id")),
            feature_columns=data.get("feature_columns"),
            include_protected=bool(data.get("include_protected", True)),
            ignore_columns=tuple(data.get("ignore_columns", ())),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "target_column": self.target_column,
            "protected_columns": list(self.protected_columns),
            "id_column": self.id_column,
            "feature_columns": None if self.feature_columns is None else list(self.feature_columns),
            "include_protected": self.include_protected,
            "ignore_columns": list(self.ignore_columns),
        }


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _sort_labels(labels: Sequence[str]) -> list[str]:
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def encode_labels(values: Sequence[Any]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Label-encode categorical values; numeric-looking labels sort numerically."""
    as_str = [str(v) for v in values]
    labels = _sort_labels(list(set(as_str)))
    index = {lab: i for i, lab in enumerate(labels)}
    codes = np.fromiter((index[s] for s in as_str), dtype=np.int64, count=len(as_str))
    return codes, tuple(labels)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable binary-classification dataset with protected attributes.

    ``protected`` holds integer group codes per protected column and
    ``group_labels`` maps each code back to the original label. When a
    protected column is part of the model input its codes also appear as a
    column of ``features`` under the same name.
    """

    ids: np.ndarray
    features: np.ndarray
    target: np.ndarray
    protected: Mapping[str, np.ndarray]
    feature_names: tuple[str, ...]
    target_name: str = "y"
    group_labels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    id_name: str = "id"
    # subsets (splits, kept rows) may legitimately hold a single group
    require_groups: bool = field(default=True, repr=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise FadoValidationError("features must be a 2-D matrix")
        n = features.shape[0]
        target = np.asarray(self.target)
        ids = np.asarray(self.ids)
        if target.shape != (n,) or ids.shape != (n,):
            raise FadoValidationError("ids, features and target must have the same length")
        if len(np.unique(ids)) != n:
            raise FadoValidationError("ids must be unique")
        if not np.isin(target, (0, 1)).all():
            raise FadoValidationError("target values must be 0 or 1")
        if not np.isfinite(features).all():
            raise FadoValidationError("feature values must be finite")
        if len(self.feature_names) != features.shape[1]:
            raise FadoValidationError("feature_names does not match the feature count")
        if not self.protected:
            raise FadoValidationError("at least one protected column is required")
        protected = {}
        labels = dict(self.group_labels)
        for name, codes in self.protected.items():
            codes = np.asarray(codes, dtype=np.int64)
            if codes.shape != (n,):
                raise FadoValidationError(f"protected column {name!r} has the wrong length")
            if self.require_groups and len(np.unique(codes)) < 2:
                raise FadoValidationError(f"protected column {name!r} needs at least two groups present")
            if name not in labels:
                labels[name] = tuple(str(g) for g in range(int(codes.max()) + 1))
            protected[name] = _readonly(codes)
        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "target", _readonly(target.astype(np.int8)))
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "protected", protected)
        object.__setattr__(self, "group_labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_arrays(
        cls,
        features: np.ndarray,
        target: Sequence[int],
        protected: Mapping[str, Sequence[Any]],
        ids: Sequence[Any] | None = None,
        feature_names: Sequence[str] | None = None,
        include_protected: bool = True,
        target_name: str = "y",
    ) -> "Dataset":
        """Build a dataset from raw arrays, label-encoding protected values."""
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        n = X.shape[0]
        names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(X.shape[1])]
        codes, labels = {}, {}
        for name, values in protected.items():
            codes[name], labels[name] = encode_labels(values)
        if include_protected:
            X = np.column_stack([X] + [codes[name].astype(np.float64) for name in codes])
            names += list(codes)
        return cls(
            ids=np.arange(n) if ids is None else np.asarray(ids),
            features=X,
            target=np.asarray(target),
            protected=codes,
            feature_names=tuple(names),
            target_name=target_name,
            group_labels=labels,
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def groups(self, column: str) -> np.ndarray:
        if column not in self.protected:
            raise SchemaError(f"unknown protected column {column!r}")
        return self.protected[column]

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        """Rows in the given order; the protected group mapping is kept."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            ids=self.ids[rows],
            features=self.features[rows],
            target=self.target[rows],
            protected={k: v[rows] for k, v in self.protected.items()},
            feature_names=self.feature_names,
            target_name=self.target_name,
            group_labels=self.group_labels,
            id_name=self.id_name,
            require_groups=False,
        )

    def positions(self, ids: Sequence[Any]) -> np.ndarray:
        """Row positions of the given ids."""
        lookup = {k: i for i, k in enumerate(self.ids.tolist())}
        try:
            return np.array([lookup[k] for k in np.asarray(ids).tolist()], dtype=np.int64)
        except KeyError as exc:
            raise FadoValidationError(f"unknown id {exc.args[0]!r}") from None

    def design_matrix(self, drop: Sequence[str] = ()) -> np.ndarray:
        """Feature matrix without the named columns (absent names are ignored)."""
        keep = [j for j, name in enumerate(self.feature_names) if name not in set(drop)]
        return self.features[:, keep]


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}, column {column!r}: cannot parse {cell!r} as a number", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {column!r}: non-finite value {cell!r}", row, column)
    return value


def load_csv(path: str | Path, schema: DatasetSchema) -> Dataset:
    """Read a headed UTF-8 CSV into a validated :class:`Dataset`.

    Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    if not path.exists():
        raise FadoValidationError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        rows = [r for r in reader if r]
    if not rows:
        raise FadoValidationError(f"{path}: no data rows")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    named = [schema.target_column, *schema.protected_columns]
    if schema.id_column is not None:
        named.append(schema.id_column)
    if schema.feature_columns is not None:
        named.extend(schema.feature_columns)
    missing = [c for c in named if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    col = {name: j for j, name in enumerate(header)}
    for i, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, found {len(r)}", i)

    roles = {schema.target_column, *schema.protected_columns, schema.id_column, *schema.ignore_columns}
    if schema.feature_columns is None:
        feat_cols = [h for h in header if h not in roles]
    else:
        feat_cols = list(schema.feature_columns)
    if schema.include_protected:
        # protected columns keep their header position among the features
        feat_cols = [h for h in header if h in set(feat_cols) | set(schema.protected_columns)]

    protected, labels = {}, {}
    for name in schema.protected_columns:
        protected[name], labels[name] = encode_labels([r[col[name]].strip() for r in rows])

    X = np.empty((len(rows), len(feat_cols)), dtype=np.float64)
    for j, name in enumerate(feat_cols):
        if name in protected:
            X[:, j] = protected[name]
            continue
        c = col[name]
        for i, r in enumerate(rows):
            X[i, j] = _parse_float(r[c].strip(), i + 1, name)

    y = np.empty(len(rows), dtype=np.int8)
    tc = col[schema.target_column]
    for i, r in enumerate(rows):
        cell = r[tc].strip()
        try:
            value = float(cell)
        except ValueError:
            raise FadoValidationError(f"row {i + 1}: target {cell!r} is not binary (0/1)") from None
        if value not in (0.0, 1.0):
            raise FadoValidationError(f"row {i + 1}: target {cell!r} is not binary (0/1)")
        y[i] = int(value)

    if schema.id_column is None:
        ids = np.arange(len(rows))
        id_name = "id"
    else:
        raw = [r[col[schema.id_column]].strip() for r in rows]
        try:
            ids = np.array([int(s) for s in raw], dtype=np.int64)
        except ValueError:
            ids = np.array(raw, dtype=object)
        if len(set(raw)) != len(raw):
            raise FadoValidationError(f"{path}: id column {schema.id_column!r} has duplicate values")
        id_name = schema.id_column

    return Dataset(
        ids=ids,
        features=X,
        target=y,
        protected=protected,
        feature_names=tuple(feat_cols),
        target_name=schema.target_column,
        group_labels=labels,
        id_name=id_name,
    )


def read_column(path: str | Path, name: str) -> np.ndarray:
    """One numeric column of a headed CSV, for side data such as weights."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r}")
        j = header.index(name)
        return np.array([_parse_float(r[j].strip(), i, name) for i, r in enumerate((r for r in reader if r), 1)])


def _fmt(value: float) -> str:
    return repr(float(value))


def write_csv(
    d: Dataset,
    path: str | Path,
    extra_columns: Mapping[str, Sequence[float]] | None = None,
) -> None:
    """Write ``d`` so that :func:`load_csv` with the matching schema reproduces it.

    Protected columns are written as their original labels. ``extra_columns``
    (for example a ``weight`` column) are appended after the target.
    """
    extra = dict(extra_columns or {})
    in_features = [name for name in d.feature_names if name in d.protected]
    outside = [name for name in d.protected if name not in in_features]
    header = [d.id_name, *d.feature_names, *outside, d.target_name, *extra]
    label_of = {name: d.group_labels[name] for name in d.protected}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        ids = d.ids.tolist()
        for i in range(d.n):
            row = [ids[i]]
            for j, name in enumerate(d.feature_names):
                if name in d.protected:
                    row.append(label_of[name][d.protected[name][i]])
                else:
                    row.append(_fmt(d.features[i, j]))
            row += [label_of[name][d.protected[name][i]] for name in outside]
            row.append(int(d.target[i]))
            row += [_fmt(values[i]) for values in extra.values()]
            writer.writerow(row)


def schema_of(d: Dataset) -> DatasetSchema:
    """Schema that reloads a file written by :func:`write_csv`."""
    include = any(name in d.protected for name in d.feature_names)
    return DatasetSchema(
        target_column=d.target_name,
        protected_columns=tuple(d.protected),
        id_column=d.id_name,
        include_protected=include,
    )


def split_ordered(
    d: Dataset,
    train_fraction: float,
    shuffle: bool = False,
    seed: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Split into the first ``floor(n * train_fraction)`` rows and the rest.

    Row order is preserved unless ``shuffle`` is set, in which case rows are
    permuted with ``seed`` first.
    """
    if not 0.0 < train_fraction < 1.0:
        raise FadoValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if d.n < 2:
        raise FadoValidationError("need at least 2 rows to split")
    n_train = math.floor(d.n * train_fraction)
    if n_train == 0 or n_train == d.n:
        raise FadoValidationError(f"split of {d.n} rows at {train_fraction} leaves an empty side")
    order = np.random.default_rng(seed).permutation(d.n) if shuffle else np.arange(d.n)
    train, test = d.subset(order[:n_train]), d.subset(order[n_train:])
    for side, part in (("train", train), ("test", test)):
        if len(np.unique(part.target)) < 2:
            warnings.warn(f"{side} split contains a single label value", stacklevel=2)
    return train, test


def group_prevalence(d: Dataset, protected_column: str) -> dict[str, float]:
    """Positive-label rate per group, keyed by the original group label."""
    codes = d.groups(protected_column)
    labels = d.group_labels[protected_column]
    out = {}
    for g in np.unique(codes):
        mask = codes == g
        out[labels[g]] = float(d.target[mask].sum()) / float(mask.sum())
    return out
