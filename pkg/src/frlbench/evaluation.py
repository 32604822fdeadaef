"""Downstream evaluation protocol.

A representation is judged by training the downstream classifier several
times (consecutive seeds), recording test accuracy and the demographic parity
distance of its test predictions each time, and reporting the mean accuracy
together with the maximum DP distance over the runs (the conservative
reading). Per-run values are kept so other aggregations can be recomputed.

Representations produced by external methods enter through a simple CSV
format: a header ``z0..z{d-1}`` and one row per row of the persisted split,
in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .classifier import ClassifierParams, train_classifier
from .dataset import SplitDataset, fit_normalize, normalize_matrix
from .errors import DataError, UnknownTaskError
from .metrics import accuracy, dp_distance
from .validation import as_float_matrix


@dataclass(frozen=True)
class RunResult:
    accuracy: float
    dp: float


@dataclass(frozen=True)
class TradeoffPoint:
    """One evaluated configuration on one task."""

    task: str
    encoder_config: dict
    mean_accuracy: float
    max_dp: float
    per_run: tuple[RunResult, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "per_run", tuple(self.per_run))
        if self.per_run:
            accs = np.array([r.accuracy for r in self.per_run])
            dps = np.array([r.dp for r in self.per_run])
            if abs(self.mean_accuracy - float(np.mean(accs))) > 1e-12:
                raise ValueError("mean_accuracy is not the mean of per_run accuracies")
            if abs(self.max_dp - float(np.max(dps))) > 1e-12:
                raise ValueError("max_dp is not the max of per_run dp values")

    @classmethod
    def from_runs(cls, task: str, encoder_config: dict,
                  per_run: list[RunResult]) -> "TradeoffPoint":
        if not per_run:
            raise ValueError("at least one run is required")
        accs = np.array([r.accuracy for r in per_run])
        dps = np.array([r.dp for r in per_run])
        return cls(
            task=task,
            encoder_config=dict(encoder_config),
            mean_accuracy=float(np.mean(accs)),
            max_dp=float(np.max(dps)),
            per_run=tuple(per_run),
        )

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "encoder_config": self.encoder_config,
            "mean_accuracy": self.mean_accuracy,
            "max_dp": self.max_dp,
            "per_run": [[r.accuracy, r.dp] for r in self.per_run],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TradeoffPoint":
        return cls(
            task=data["task"],
            encoder_config=data["encoder_config"],
            mean_accuracy=data["mean_accuracy"],
            max_dp=data["max_dp"],
            per_run=tuple(RunResult(a, d) for a, d in data["per_run"]),
        )


def evaluate_protocol(
    reps_train,
    reps_test,
    labels_train,
    labels_test,
    groups_test,
    params: ClassifierParams,
    n_runs: int = 5,
    task: str = "",
    encoder_config: dict | None = None,
    n_groups: int | None = None,
    trainer=train_classifier,
) -> TradeoffPoint:
    """Run the repeated-training protocol on one task.

    Representations must already be normalized with train-fitted statistics.
    Run ``i`` uses seed ``params.seed + i``; ``trainer`` is pluggable so the
    aggregation can be exercised with stub classifiers.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    reps_train = as_float_matrix(reps_train, "reps_train")
    reps_test = as_float_matrix(reps_test, "reps_test")
    runs = []
    for i in range(n_runs):
        clf = trainer(reps_train, labels_train, params.with_seed(params.seed + i))
        preds = clf.predict(reps_test)
        runs.append(
            RunResult(
                accuracy=accuracy(preds, labels_test),
                dp=dp_distance(preds, groups_test, n_groups=n_groups),
            )
        )
    return TradeoffPoint.from_runs(task, encoder_config or {}, runs)


def unfair_baseline(
    sd: SplitDataset,
    task: str,
    params: ClassifierParams,
    n_runs: int = 5,
    trainer=train_classifier,
) -> TradeoffPoint:
    """Evaluate a classifier on the normalized raw features (identity encoder)."""
    if task not in sd.train.tasks:
        raise UnknownTaskError(f"task {task!r} not in dataset")
    stats = fit_normalize(sd.train)
    return evaluate_protocol(
        normalize_matrix(sd.train.features, stats),
        normalize_matrix(sd.test.features, stats),
        sd.train.tasks[task],
        sd.test.tasks[task],
        sd.test.sensitive,
        params,
        n_runs=n_runs,
        task=task,
        encoder_config={"encoder": "identity"},
        n_groups=sd.train.n_groups,
        trainer=trainer,
    )


# ---------------------------------------------------------------------------
# Representation exchange files
# ---------------------------------------------------------------------------

def save_representations(path, reps: np.ndarray) -> None:
    """Write a representation matrix as CSV with header ``z0..z{d-1}``."""
    reps = as_float_matrix(reps, "reps")
    frame = pd.DataFrame(reps, columns=[f"z{j}" for j in range(reps.shape[1])])
    frame.to_csv(path, index=False)


def load_representations(path) -> np.ndarray:
    """Read a representation CSV; rows must align with the persisted split."""
    path = Path(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    expected = [f"z{j}" for j in range(len(frame.columns))]
    if list(frame.columns) != expected:
        raise DataError(
            f"{path}: header must be z0..z{len(frame.columns) - 1}, "
            f"got {list(frame.columns)[:5]}"
        )
    try:
        values = frame.to_numpy(dtype=str).astype(np.float64)
    except ValueError:
        raise DataError(f"{path}: non-numeric representation value") from None
    if not np.isfinite(values).all():
        raise DataError(f"{path}: non-finite representation value")
    return values
