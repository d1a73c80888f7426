"""Data containers: response/predictor/modifier matrices, group structure,
and standardization.

The model is y_i = beta0 + z_i theta0 + sum_j (beta_j + theta_j z_i^T) x_ij.
X holds the main predictors (columns x_j), Z the modifying variables
(columns z_k). Dummy-coded Z columns take values in {0,1} and are exempt
from scaling so that dummy-modified slopes stay interpretable.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Dataset",
    "GroupSpec",
    "StandardizationRecord",
    "standardize",
    "interaction_features",
    "load_dataset_csv",
    "load_groups_json",
    "save_groups_json",
    "singleton_groups",
]


class DataError(ValueError):
    """Raised for malformed datasets, group specs, or input files."""


@dataclass(frozen=True)
class Dataset:
    """Immutable bundle of (y, X, Z) with column metadata.

    Attributes
    ----------
    y : (N,) response
    X : (N, p) main predictors
    Z : (N, K) modifying variables; K may be 0
    x_names, z_names : column names
    standardized : True once `standardize` has been applied
    dummy_columns : indices of Z columns treated as 0/1 dummies
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: tuple[str, ...] = ()
    z_names: tuple[str, ...] = ()
    standardized: bool = False
    dummy_columns: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(len(y), -1) if Z.size else np.zeros((len(y), 0))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        n = y.shape[0]
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if X.shape[0] != n or Z.shape[0] != n:
            raise DataError(
                f"row mismatch: y has {n}, X has {X.shape[0]}, Z has {Z.shape[0]}"
            )
        if X.shape[1] < 1:
            raise DataError("X needs at least one column")
        for name, arr in (("y", y), ("X", X), ("Z", Z)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite entries in {name}")
        if not self.x_names:
            object.__setattr__(
                self, "x_names", tuple(f"x{j + 1}" for j in range(X.shape[1]))
            )
        if not self.z_names:
            object.__setattr__(
                self, "z_names", tuple(f"z{k + 1}" for k in range(Z.shape[1]))
            )
        if len(self.x_names) != X.shape[1] or len(self.z_names) != Z.shape[1]:
            raise DataError("column name count does not match matrix shape")
        bad = [k for k in self.dummy_columns if not 0 <= k < Z.shape[1]]
        if bad:
            raise DataError(f"dummy column index out of range: {bad[0]}")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    def detect_dummies(self) -> frozenset[int]:
        """Z columns whose values are a subset of {0,1}, plus declared ones."""
        found = set(self.dummy_columns)
        for k in range(self.k):
            col = self.Z[:, k]
            if np.all((col == 0.0) | (col == 1.0)):
                found.add(k)
        return frozenset(found)


@dataclass(frozen=True)
class GroupSpec:
    """Partition of predictors into L groups and modifiers into G groups.

    Indices are 0-based internally; the JSON interchange format is 1-based.
    """

    predictor_groups: tuple[tuple[int, ...], ...]
    modifier_groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "predictor_groups",
            tuple(tuple(int(i) for i in g) for g in self.predictor_groups),
        )
        object.__setattr__(
            self,
            "modifier_groups",
            tuple(tuple(int(i) for i in g) for g in self.modifier_groups),
        )

    @property
    def n_predictor_groups(self) -> int:
        return len(self.predictor_groups)

    @property
    def n_modifier_groups(self) -> int:
        return len(self.modifier_groups)

    def validate(self, p: int, k: int) -> None:
        """Check both partitions cover {0..p-1} / {0..k-1} disjointly."""
        _check_partition(self.predictor_groups, p, "predictor")
        _check_partition(self.modifier_groups, k, "modifier")


def _check_partition(groups, size: int, kind: str) -> None:
    seen: set[int] = set()
    for g in groups:
        if not g:
            raise DataError(f"empty {kind} group")
        for i in g:
            if not 0 <= i < size:
                raise DataError(f"{kind} index {i + 1} out of range 1..{size}")
            if i in seen:
                raise DataError(f"{kind} index {i + 1} appears in two groups")
            seen.add(i)
    if len(seen) != size:
        missing = sorted(set(range(size)) - seen)
        raise DataError(
            f"{kind} groups do not cover index {missing[0] + 1} (of 1..{size})"
        )


def singleton_groups(p: int, k: int, single_modifier_group: bool = False) -> GroupSpec:
    """Every predictor its own group; modifiers either singletons or one block."""
    mods: tuple[tuple[int, ...], ...]
    if k == 0:
        mods = ()
    elif single_modifier_group:
        mods = (tuple(range(k)),)
    else:
        mods = tuple((i,) for i in range(k))
    return GroupSpec(tuple((j,) for j in range(p)), mods)


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-column centers/scales needed to map coefficients back to the
    original units. Dummy Z columns get center 0 and scale 1."""

    y_mean: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    z_mean: np.ndarray
    z_scale: np.ndarray


def standardize(
    d: Dataset, dummy_columns: frozenset[int] | None = None
) -> tuple[Dataset, StandardizationRecord]:
    """Center y; center and unit-scale (sample sd, ddof=1) every X column and
    every non-dummy Z column. Dummy columns pass through untouched.

    Raises DataError naming the first constant column encountered.
    """
    if d.standardized:
        raise DataError("dataset is already standardized")
    dummies = d.detect_dummies() if dummy_columns is None else frozenset(dummy_columns)

    y = d.y - d.y.mean()
    x_mean = d.X.mean(axis=0)
    x_scale = d.X.std(axis=0, ddof=1)
    for j in range(d.p):
        if x_scale[j] == 0.0:
            raise DataError(f"constant X column: {d.x_names[j]}")
    X = (d.X - x_mean) / x_scale

    z_mean = np.zeros(d.k)
    z_scale = np.ones(d.k)
    Z = d.Z.copy()
    for k in range(d.k):
        if k in dummies:
            continue
        mu = Z[:, k].mean()
        sd = Z[:, k].std(ddof=1)
        if sd == 0.0:
            raise DataError(f"constant Z column: {d.z_names[k]}")
        z_mean[k] = mu
        z_scale[k] = sd
        Z[:, k] = (Z[:, k] - mu) / sd

    out = replace(d, y=y, X=X, Z=Z, standardized=True, dummy_columns=dummies)
    rec = StandardizationRecord(
        y_mean=float(d.y.mean()),
        x_mean=x_mean,
        x_scale=x_scale,
        z_mean=z_mean,
        z_scale=z_scale,
    )
    return out, rec


def apply_standardization(d: Dataset, rec: StandardizationRecord) -> Dataset:
    """Transform a dataset with *given* centers/scales (e.g. held-out fold
    rows with training statistics). The y column is centered by rec.y_mean."""
    X = (d.X - rec.x_mean) / rec.x_scale
    Z = (d.Z - rec.z_mean) / rec.z_scale
    return replace(
        d, y=d.y - rec.y_mean, X=X, Z=Z, standardized=True,
        dummy_columns=d.detect_dummies(),
    )


def interaction_features(d: Dataset) -> np.ndarray:
    """All x_j * z_k products as an (N, p*K) matrix, column order
    (j=0,k=0), (j=0,k=1), ..., i.e. row-major over (j, k)."""
    if d.k == 0:
        return np.zeros((d.n, 0))
    return (d.X[:, :, None] * d.Z[:, None, :]).reshape(d.n, d.p * d.k)


# ---------------------------------------------------------------------------
# File interchange
# ---------------------------------------------------------------------------

def _read_csv_matrix(path: str) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), [h.strip() for h in header]


def load_dataset_csv(x_path: str, z_path: str | None, y_path: str) -> Dataset:
    """Assemble a Dataset from X/Z/y CSV files (header row required).
    z_path may be None for a modifier-free dataset."""
    X, x_names = _read_csv_matrix(x_path)
    yv, _ = _read_csv_matrix(y_path)
    if yv.shape[1] != 1:
        raise DataError(f"{y_path}: expected a single column, got {yv.shape[1]}")
    y = yv[:, 0]
    if z_path is not None:
        Z, z_names = _read_csv_matrix(z_path)
    else:
        Z, z_names = np.zeros((len(y), 0)), []
    return Dataset(y=y, X=X, Z=Z, x_names=tuple(x_names), z_names=tuple(z_names))


def load_groups_json(path: str, p: int, k: int) -> GroupSpec:
    """Group file: {"predictor_groups": [[1,2],...], "modifier_groups": [[1],...]}
    with 1-based column indices."""
    with open(path) as fh:
        raw = json.load(fh)
    try:
        pg = [[int(i) - 1 for i in g] for g in raw["predictor_groups"]]
        mg = [[int(i) - 1 for i in g] for g in raw["modifier_groups"]]
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: malformed group spec ({e})") from None
    gs = GroupSpec(tuple(map(tuple, pg)), tuple(map(tuple, mg)))
    gs.validate(p, k)
    return gs


def save_groups_json(gs: GroupSpec, path: str) -> None:
    payload = {
        "predictor_groups": [[i + 1 for i in g] for g in gs.predictor_groups],
        "modifier_groups": [[i + 1 for i in g] for g in gs.modifier_groups],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
