"""In-memory tabular dataset model with splitting, normalization, one-hot
encoding, and on-disk persistence.

A :class:`Dataset` bundles a dense feature matrix, a per-row sensitive group
id, and any number of named binary task labels. Instances are immutable after
construction (arrays are marked read-only) and safe to share across workers.

On disk a dataset is a directory holding ``data.csv`` plus a ``dataset.json``
sidecar naming the columns; a split adds ``train.csv``, ``test.csv`` and a
``split.json`` sidecar with the seed, fraction, and exact row-index lists so
published splits reproduce bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DimensionMismatchError,
    EmptyCsvError,
    EmptyGroupError,
    MissingColumnError,
    MissingValueError,
    NonNumericValueError,
)

FORMAT_VERSION = 1

# reserved column name for the sensitive attribute in persisted CSVs
SENSITIVE_COLUMN = "_sensitive"


@dataclass(frozen=True)
class TableSchema:
    """Declares the roles of the columns expected in a CSV file."""

    features: tuple[str, ...]
    sensitive: str
    tasks: tuple[str, ...]
    categorical: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        unknown = set(self.categorical) - set(self.features)
        if unknown:
            raise ValueError(f"categorical columns not in features: {sorted(unknown)}")
        roles = list(self.features) + [self.sensitive] + list(self.tasks)
        if len(set(roles)) != len(roles):
            raise ValueError("feature, sensitive, and task column names overlap")

    @property
    def columns(self) -> tuple[str, ...]:
        return self.features + (self.sensitive,) + self.tasks


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable tabular dataset: features, sensitive groups, binary tasks.

    ``n_groups`` defaults to the observed group count, in which case ids must
    be dense (every group in ``0..max`` nonempty). Subsets of a dataset (e.g.
    a test split) carry their parent's declared count, so a group may be
    empty in a subset; metrics that require occupied groups check again.
    """

    features: np.ndarray
    sensitive: np.ndarray
    tasks: dict[str, np.ndarray]
    feature_names: tuple[str, ...]
    n_groups: int | None = None

    def __post_init__(self):
        feats = _freeze(np.asarray(self.features, dtype=np.float64))
        sens = _freeze(np.asarray(self.sensitive, dtype=np.int64))
        names = tuple(self.feature_names)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "sensitive", sens)
        object.__setattr__(self, "feature_names", names)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = feats.shape[0]
        if len(names) != feats.shape[1]:
            raise ValueError(
                f"{len(names)} feature names for {feats.shape[1]} columns"
            )
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        if sens.shape != (n,):
            raise ValueError("sensitive vector length does not match features")
        if n > 0 and sens.min() < 0:
            raise ValueError("sensitive group ids must be non-negative")
        if self.n_groups is None:
            k = int(sens.max()) + 1 if n > 0 else 0
            if n > 0:
                counts = np.bincount(sens, minlength=k)
                if (counts == 0).any():
                    empty = int(np.flatnonzero(counts == 0)[0])
                    raise EmptyGroupError(f"sensitive group {empty} has zero rows")
            object.__setattr__(self, "n_groups", k)
        else:
            k = int(self.n_groups)
            if n > 0 and sens.max() >= k:
                raise ValueError(
                    f"sensitive id {int(sens.max())} outside declared 0..{k - 1}"
                )
            object.__setattr__(self, "n_groups", k)
        frozen_tasks = {}
        for name, vec in self.tasks.items():
            if name in names:
                raise ValueError(f"task {name!r} collides with a feature name")
            v = _freeze(np.asarray(vec, dtype=np.int64))
            if v.shape != (n,):
                raise ValueError(f"task {name!r} length does not match features")
            if n > 0 and ((v != 0) & (v != 1)).any():
                raise ValueError(f"task {name!r} has labels outside {{0, 1}}")
            frozen_tasks[name] = v
        object.__setattr__(self, "tasks", frozen_tasks)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def task_names(self) -> tuple[str, ...]:
        return tuple(self.tasks)

    def subset(self, rows) -> "Dataset":
        """New Dataset restricted to the given row indices (order preserved)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            sensitive=self.sensitive[rows],
            tasks={k: v[rows] for k, v in self.tasks.items()},
            feature_names=self.feature_names,
            n_groups=self.n_groups,
        )


@dataclass(frozen=True)
class SplitDataset:
    """A deterministic train/test partition of a source dataset."""

    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float
    train_indices: np.ndarray = field(default=None)  # rows of the source dataset
    test_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.train_indices is not None:
            object.__setattr__(
                self, "train_indices",
                _freeze(np.asarray(self.train_indices, dtype=np.int64)),
            )
        if self.test_indices is not None:
            object.__setattr__(
                self, "test_indices",
                _freeze(np.asarray(self.test_indices, dtype=np.int64)),
            )

    @property
    def n(self) -> int:
        return self.train.n + self.test.n

    def dataset_id(self) -> str:
        """Content hash identifying this exact split (used to key trials)."""
        h = hashlib.sha256()
        h.update(f"{self.seed}:{self.test_fraction!r}:{self.n}".encode())
        for idx in (self.train_indices, self.test_indices):
            if idx is not None:
                h.update(idx.tobytes())
        h.update(",".join(self.train.feature_names).encode())
        h.update(",".join(self.train.task_names).encode())
        return h.hexdigest()[:16]


def split(d: Dataset, test_fraction: float, seed: int) -> SplitDataset:
    """Deterministic uniform random train/test split.

    The test set receives ``round(test_fraction * n)`` rows (clamped so
    neither side is empty) of a seeded permutation. Identical inputs always
    produce identical splits.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if d.n < 2:
        raise ValueError("need at least 2 rows to split")
    n_test = int(round(test_fraction * d.n))
    n_test = min(max(n_test, 1), d.n - 1)
    perm = np.random.default_rng(seed).permutation(d.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitDataset(
        train=d.subset(train_idx),
        test=d.subset(test_idx),
        seed=seed,
        test_fraction=test_fraction,
        train_indices=train_idx,
        test_indices=test_idx,
    )


@dataclass(frozen=True)
class NormStats:
    """Per-column z-score statistics fitted on training rows only.

    Uses population standard deviation (divide by n). Columns with std below
    1e-12 are treated as constant and transform to all-zeros.
    """

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _freeze(np.asarray(self.means, dtype=np.float64)))
        object.__setattr__(self, "stds", _freeze(np.asarray(self.stds, dtype=np.float64)))
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ValueError("means and stds must be 1-D and equally long")
        if (self.stds < 0).any():
            raise ValueError("stds must be non-negative")


CONSTANT_STD = 1e-12


def fit_normalize(train: Dataset | np.ndarray) -> NormStats:
    """Fit per-column z-score statistics on the training feature matrix."""
    x = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("fit_normalize requires a nonempty 2-D matrix")
    return NormStats(means=x.mean(axis=0), stds=x.std(axis=0))


def normalize_matrix(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """Apply fitted z-score statistics to a raw feature matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != len(stats.means):
        raise DimensionMismatchError(
            f"stats fitted on {len(stats.means)} columns, data has {x.shape[1]}"
        )
    safe = np.where(stats.stds < CONSTANT_STD, 1.0, stats.stds)
    out = (x - stats.means) / safe
    out[:, stats.stds < CONSTANT_STD] = 0.0
    return out


def apply_normalize(d: Dataset, stats: NormStats) -> Dataset:
    """Z-score a dataset's features; constant columns map to zeros."""
    return Dataset(
        features=normalize_matrix(d.features, stats),
        sensitive=d.sensitive,
        tasks=dict(d.tasks),
        feature_names=d.feature_names,
        n_groups=d.n_groups,
    )


def one_hot(d: Dataset, columns) -> Dataset:
    """Expand categorical code columns into binary indicator columns.

    Each listed column must hold non-negative integer codes; it is replaced
    in place by one ``"name=code"`` column per distinct observed code (in
    ascending code order), so each row sums to exactly 1 across the group.
    """
    columns = list(columns)
    missing = [c for c in columns if c not in d.feature_names]
    if missing:
        raise MissingColumnError(f"column {missing[0]!r} not in dataset")
    todo = set(columns)
    out_cols: list[np.ndarray] = []
    out_names: list[str] = []
    for j, name in enumerate(d.feature_names):
        col = d.features[:, j]
        if name not in todo:
            out_cols.append(col)
            out_names.append(name)
            continue
        codes = col.astype(np.int64)
        if not np.array_equal(codes, col) or (codes < 0).any():
            raise ValueError(f"column {name!r} is not non-negative integer codes")
        for value in np.unique(codes):
            out_cols.append((codes == value).astype(np.float64))
            out_names.append(f"{name}={int(value)}")
    return Dataset(
        features=np.column_stack(out_cols) if out_cols else d.features[:, :0],
        sensitive=d.sensitive,
        tasks=dict(d.tasks),
        feature_names=tuple(out_names),
        n_groups=d.n_groups,
    )


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------

def _numeric_column(raw: pd.Series, name: str) -> np.ndarray:
    """Parse a string column to float64 with row-accurate error reporting.

    Uses numpy's string cast (correctly rounded, unlike the pandas fast
    parser) so persisted floats round-trip bit-exactly.
    """
    values = np.asarray(raw.to_numpy(), dtype=str)
    stripped = np.char.strip(values)
    empty = stripped == ""
    if empty.any():
        row = int(np.flatnonzero(empty)[0]) + 1  # 1-based data row
        raise MissingValueError(f"column {name!r}: empty cell at data row {row}")
    try:
        out = stripped.astype(np.float64)
    except ValueError:
        bad = pd.to_numeric(raw, errors="coerce").isna().to_numpy()
        row = int(np.flatnonzero(bad)[0]) + 1 if bad.any() else 1
        value = values[bad][0] if bad.any() else "?"
        raise NonNumericValueError(
            f"column {name!r}: non-numeric value {value!r} at data row {row}"
        ) from None
    finite = np.isfinite(out)
    if not finite.all():
        row = int(np.flatnonzero(~finite)[0]) + 1
        raise NonNumericValueError(
            f"column {name!r}: non-finite value at data row {row}"
        )
    return out


def _int_column(values: np.ndarray, name: str) -> np.ndarray:
    codes = values.astype(np.int64)
    if not np.array_equal(codes, values):
        raise NonNumericValueError(f"column {name!r} has non-integer values")
    return codes


def load_csv(path, schema: TableSchema, n_groups: int | None = None) -> Dataset:
    """Load a strict UTF-8 comma-separated file against a declared schema.

    The header row must contain every schema column; extra columns are
    ignored. Missing columns, empty cells, and non-numeric cells each raise
    a distinct error naming the offender.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyCsvError(f"{path}: file is empty") from None
    if len(df) == 0:
        raise EmptyCsvError(f"{path}: no data rows")
    for col in schema.columns:
        if col not in df.columns:
            raise MissingColumnError(f"{path}: missing column {col!r}")
    feats = np.column_stack(
        [_numeric_column(df[c], c) for c in schema.features]
    ) if schema.features else np.empty((len(df), 0))
    sens = _int_column(_numeric_column(df[schema.sensitive], schema.sensitive),
                       schema.sensitive)
    if len(sens) and sens.min() < 0:
        raise DataError(f"column {schema.sensitive!r}: negative group id")
    tasks = {}
    for t in schema.tasks:
        vec = _int_column(_numeric_column(df[t], t), t)
        if ((vec != 0) & (vec != 1)).any():
            raise DataError(f"task column {t!r} has values outside {{0, 1}}")
        tasks[t] = vec
    try:
        return Dataset(
            features=feats,
            sensitive=sens,
            tasks=tasks,
            feature_names=schema.features,
            n_groups=n_groups,
        )
    except EmptyGroupError as exc:
        raise EmptyGroupError(
            f"column {schema.sensitive!r}: group ids must be dense 0..K-1 ({exc})"
        ) from None


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _dataset_frame(d: Dataset) -> pd.DataFrame:
    frame = pd.DataFrame(np.asarray(d.features), columns=list(d.feature_names))
    frame[SENSITIVE_COLUMN] = np.asarray(d.sensitive)
    for name, vec in d.tasks.items():
        frame[name] = np.asarray(vec)
    return frame


def _dataset_sidecar(d: Dataset) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "n": d.n,
        "features": list(d.feature_names),
        "sensitive": SENSITIVE_COLUMN,
        "n_groups": d.n_groups,
        "tasks": list(d.tasks),
    }


def save_dataset(d: Dataset, directory) -> Path:
    """Write ``data.csv`` and ``dataset.json`` into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if SENSITIVE_COLUMN in d.feature_names or SENSITIVE_COLUMN in d.tasks:
        raise DataError(f"{SENSITIVE_COLUMN!r} is a reserved column name")
    _dataset_frame(d).to_csv(directory / "data.csv", index=False)
    (directory / "dataset.json").write_text(
        json.dumps(_dataset_sidecar(d), indent=2)
    )
    return directory


def _load_frame(path: Path, sidecar: dict) -> Dataset:
    schema = TableSchema(
        features=tuple(sidecar["features"]),
        sensitive=sidecar["sensitive"],
        tasks=tuple(sidecar["tasks"]),
    )
    d = load_csv(path, schema, n_groups=sidecar.get("n_groups"))
    return d


def load_dataset(directory) -> Dataset:
    """Load a dataset directory written by :func:`save_dataset`."""
    directory = Path(directory)
    sidecar_path = directory / "dataset.json"
    if not sidecar_path.exists():
        raise DataError(f"{directory}: no dataset.json sidecar")
    sidecar = json.loads(sidecar_path.read_text())
    return _load_frame(directory / "data.csv", sidecar)


def save_split(sd: SplitDataset, directory) -> Path:
    """Write ``train.csv``, ``test.csv`` and the ``split.json`` sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _dataset_frame(sd.train).to_csv(directory / "train.csv", index=False)
    _dataset_frame(sd.test).to_csv(directory / "test.csv", index=False)
    sidecar = _dataset_sidecar(sd.train)
    sidecar.update(
        seed=sd.seed,
        test_fraction=sd.test_fraction,
        train_indices=[int(i) for i in sd.train_indices],
        test_indices=[int(i) for i in sd.test_indices],
        dataset_id=sd.dataset_id(),
    )
    del sidecar["n"]
    (directory / "split.json").write_text(json.dumps(sidecar))
    return directory


def load_split(directory) -> SplitDataset:
    """Load a split directory written by :func:`save_split`."""
    directory = Path(directory)
    sidecar_path = directory / "split.json"
    if not sidecar_path.exists():
        raise DataError(f"{directory}: no split.json sidecar (run `split` first)")
    sidecar = json.loads(sidecar_path.read_text())
    train = _load_frame(directory / "train.csv", sidecar)
    test = _load_frame(directory / "test.csv", sidecar)
    return SplitDataset(
        train=train,
        test=test,
        seed=sidecar["seed"],
        test_fraction=sidecar["test_fraction"],
        train_indices=np.asarray(sidecar["train_indices"], dtype=np.int64),
        test_indices=np.asarray(sidecar["test_indices"], dtype=np.int64),
    )
