"""Hyperparameter sweep orchestration with a resumable on-disk record store.

A sweep expands a grid into config points, runs one trial per point (build
encoder, encode the split, evaluate every task under the repeated-training
protocol), and writes one JSON record per trial, atomically, keyed by a hash
of (config point, dataset id, protocol). Completed trials are skipped on
rerun; per-trial failures are recorded instead of aborting the sweep. Trials
are independent, so a worker pool yields a store identical to a serial run.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .classifier import ClassifierParams
from .dataset import SplitDataset, fit_normalize, load_split, normalize_matrix
from .errors import DataError, UnknownTaskError
from .evaluation import TradeoffPoint, evaluate_protocol, load_representations
from .fare import CriterionWeights, FareParams, RecMode, build_tree

ENCODER_KINDS = ("fare", "fare-rec", "fare-rec-abs", "identity", "external")
TREE_KINDS = ("fare", "fare-rec", "fare-rec-abs")

# Appendix-style lattice presets: the published ranges are continuous, these
# densities are toolkit choices and fully overridable.
FARE_PRESET_GRID = {
    "gamma": [round(0.1 * i, 1) for i in range(11)],
    "max_leaves": [2, 5, 10, 20, 50, 100, 200],
}
FARE_REC_PRESET_GRID = {
    "max_leaves": [200, 400, 800, 1600, 3200, 6400, 12800],
    "lambda_f": [0.1, 0.3, 1.0],
    "lambda_r": [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
}
PRESET_GRIDS = {
    "fare": FARE_PRESET_GRID,
    "fare-rec": FARE_REC_PRESET_GRID,
    "fare-rec-abs": FARE_REC_PRESET_GRID,
}

DEFAULT_MIN_LEAF = 100
DEFAULT_VAL_FRACTION = 0.3


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to reproduce one experiment run."""

    data_dir: str
    encoder: str
    out_dir: str
    eval_tasks: tuple[str, ...]
    train_task: str | None = None
    train_on_eval_task: bool = False
    grid: dict = field(default_factory=dict)
    classifier: ClassifierParams = field(default_factory=ClassifierParams)
    n_runs: int = 5
    workers: int = 1
    reps_train: str | None = None
    reps_test: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "eval_tasks", tuple(self.eval_tasks))
        if self.encoder not in ENCODER_KINDS:
            raise ValueError(
                f"encoder must be one of {ENCODER_KINDS}, got {self.encoder!r}"
            )
        if not self.eval_tasks:
            raise ValueError("eval_tasks must be nonempty")
        if self.encoder in TREE_KINDS and not self.grid:
            raise ValueError("grid must be nonempty for tree encoders")
        if self.encoder == "external" and not (self.reps_train and self.reps_test):
            raise ValueError("external encoder requires reps_train and reps_test")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def protocol_dict(self) -> dict:
        return {
            "classifier": self.classifier.to_dict(),
            "n_runs": self.n_runs,
            "encoder": self.encoder,
            "train_task": self.train_task,
            "train_on_eval_task": self.train_on_eval_task,
            "eval_tasks": list(self.eval_tasks),
        }

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "encoder": self.encoder,
            "out_dir": self.out_dir,
            "eval_tasks": list(self.eval_tasks),
            "train_task": self.train_task,
            "train_on_eval_task": self.train_on_eval_task,
            "grid": self.grid,
            "classifier": self.classifier.to_dict(),
            "n_runs": self.n_runs,
            "workers": self.workers,
            "reps_train": self.reps_train,
            "reps_test": self.reps_test,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        grid = data.get("grid", {})
        if grid == "preset":
            grid = PRESET_GRIDS[data["encoder"]]
        return cls(
            data_dir=data["data_dir"],
            encoder=data["encoder"],
            out_dir=data["out_dir"],
            eval_tasks=tuple(data["eval_tasks"]),
            train_task=data.get("train_task"),
            train_on_eval_task=data.get("train_on_eval_task", False),
            grid=grid,
            classifier=ClassifierParams(**data.get("classifier", {})),
            n_runs=data.get("n_runs", 5),
            workers=data.get("workers", 1),
            reps_train=data.get("reps_train"),
            reps_test=data.get("reps_test"),
        )

    @classmethod
    def load(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TrialRecord:
    """Result of one grid point (append-only, idempotently keyed)."""

    key: str
    config_point: dict
    encoder: str
    points: dict  # task -> TradeoffPoint
    wall_seconds: float
    version: str
    status: str  # "ok" or "failed"
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "config_point": self.config_point,
            "encoder": self.encoder,
            "points": {t: p.to_dict() for t, p in self.points.items()},
            "wall_seconds": self.wall_seconds,
            "version": self.version,
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialRecord":
        return cls(
            key=data["key"],
            config_point=data["config_point"],
            encoder=data["encoder"],
            points={t: TradeoffPoint.from_dict(p)
                    for t, p in data["points"].items()},
            wall_seconds=data["wall_seconds"],
            version=data["version"],
            status=data["status"],
            error=data.get("error", ""),
        )


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product of a name -> values grid (one empty point if empty)."""
    if not grid:
        return [{}]
    names = list(grid)
    combos = itertools.product(*(grid[name] for name in names))
    return [dict(zip(names, combo)) for combo in combos]


def trial_key(config_point: dict, dataset_id: str, protocol: dict) -> str:
    payload = json.dumps(
        {"point": config_point, "dataset": dataset_id, "protocol": protocol},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def encoder_params(kind: str, point: dict) -> FareParams:
    """Interpret a grid point as tree hyperparameters for the given kind."""
    common = dict(
        max_leaves=int(point.get("max_leaves", 32)),
        min_leaf_samples=int(point.get("min_leaf_samples", DEFAULT_MIN_LEAF)),
        val_fraction=float(point.get("val_fraction", DEFAULT_VAL_FRACTION)),
        seed=int(point.get("seed", 0)),
    )
    if kind == "fare":
        if "gamma" in point:
            weights = CriterionWeights.from_gamma(float(point["gamma"]))
        else:
            weights = CriterionWeights(
                lambda_y=float(point.get("lambda_y", 1.0)),
                lambda_f=float(point.get("lambda_f", 0.0)),
            )
        return FareParams(weights=weights, **common)
    if kind in ("fare-rec", "fare-rec-abs"):
        mode = RecMode.MEAN_SQUARED if kind == "fare-rec" else RecMode.ABS_MEDIAN
        weights = CriterionWeights(
            lambda_y=float(point.get("lambda_y", 0.0)),
            lambda_f=float(point.get("lambda_f", 0.5)),
            lambda_r=float(point.get("lambda_r", 1.0)),
            rec_mode=mode,
        )
        return FareParams(weights=weights, **common)
    raise ValueError(f"{kind!r} is not a tree encoder kind")


def _validate_tasks(sd: SplitDataset, config: SweepConfig) -> None:
    known = set(sd.train.tasks)
    for task in config.eval_tasks:
        if task not in known:
            raise UnknownTaskError(f"evaluation task {task!r} not in dataset")
    if config.train_task is not None and config.train_task not in known:
        raise UnknownTaskError(f"training task {config.train_task!r} not in dataset")
    if (config.encoder in TREE_KINDS and not config.train_on_eval_task
            and config.train_task is None):
        needs_labels = any(
            encoder_params(config.encoder, p).weights.lambda_y > 0
            for p in expand_grid(config.grid)
        )
        if needs_labels:
            raise UnknownTaskError(
                "label-weighted tree encoders need --task (or train_on_eval_task)"
            )


def _representations(sd: SplitDataset, config: SweepConfig, point: dict,
                     train_task: str | None):
    """Train/test representation matrices for one trial."""
    if config.encoder == "identity":
        return sd.train.features, sd.test.features, {"encoder": "identity"}
    if config.encoder == "external":
        reps_train = load_representations(config.reps_train)
        reps_test = load_representations(config.reps_test)
        if len(reps_train) != sd.train.n or len(reps_test) != sd.test.n:
            raise DataError(
                "representation files do not match the split row counts "
                f"({len(reps_train)}x{len(reps_test)} vs {sd.train.n}x{sd.test.n})"
            )
        return reps_train, reps_test, {"encoder": "external"}
    params = encoder_params(config.encoder, point)
    tree = build_tree(sd.train, train_task, params)
    info = {"encoder": config.encoder, "train_task": train_task, **point}
    return tree.encode_matrix(sd.train.features), tree.encode_matrix(
        sd.test.features), info


def run_trial(sd: SplitDataset, config: SweepConfig, point: dict,
              key: str) -> TrialRecord:
    start = time.perf_counter()
    try:
        points: dict[str, TradeoffPoint] = {}
        if config.encoder in TREE_KINDS and config.train_on_eval_task:
            task_plans = [(task, task) for task in config.eval_tasks]
        else:
            task_plans = [(task, config.train_task) for task in config.eval_tasks]
        cached_reps = {}
        for eval_task, train_task in task_plans:
            if train_task not in cached_reps:
                cached_reps[train_task] = _representations(
                    sd, config, point, train_task
                )
            reps_train, reps_test, info = cached_reps[train_task]
            stats = fit_normalize(reps_train)
            points[eval_task] = evaluate_protocol(
                normalize_matrix(reps_train, stats),
                normalize_matrix(reps_test, stats),
                sd.train.tasks[eval_task],
                sd.test.tasks[eval_task],
                sd.test.sensitive,
                config.classifier,
                n_runs=config.n_runs,
                task=eval_task,
                encoder_config=info,
                n_groups=sd.train.n_groups,
            )
        status, error = "ok", ""
    except Exception as exc:  # per-trial failures never abort the sweep
        points, status, error = {}, "failed", f"{type(exc).__name__}: {exc}"
    return TrialRecord(
        key=key,
        config_point=point,
        encoder=config.encoder,
        points=points,
        wall_seconds=time.perf_counter() - start,
        version=__version__,
        status=status,
        error=error,
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


_WORKER_STATE: dict = {}


def _worker_init(data_dir: str) -> None:
    _WORKER_STATE["split"] = load_split(data_dir)


def _worker_run(args) -> str:
    config_dict, point, key = args
    config = SweepConfig.from_dict(config_dict)
    record = run_trial(_WORKER_STATE["split"], config, point, key)
    _atomic_write(Path(config.out_dir) / f"{key}.json",
                  json.dumps(record.to_dict()))
    return key


_RECORD_NAME = re.compile(r"[0-9a-f]{24}\.json")


def load_records(out_dir) -> list[TrialRecord]:
    """All trial records in a store (files named by their hash key)."""
    out = []
    for path in sorted(Path(out_dir).glob("*.json")):
        if _RECORD_NAME.fullmatch(path.name):
            out.append(TrialRecord.from_dict(json.loads(path.read_text())))
    return out


def _write_index(out_dir: Path, records: list[TrialRecord]) -> None:
    index = [
        {"key": r.key, "status": r.status, "config_point": r.config_point}
        for r in sorted(records, key=lambda r: r.key)
    ]
    _atomic_write(out_dir / "index.json", json.dumps(index, indent=2))


def run_sweep(config: SweepConfig) -> list[TrialRecord]:
    """Execute (or resume) every grid point; returns all records in the store.

    Records with status "ok" are never recomputed; failed records are retried.
    """
    sd = load_split(config.data_dir)
    _validate_tasks(sd, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_id = sd.dataset_id()
    protocol = config.protocol_dict()
    plan = []
    planned = set()
    for point in expand_grid(config.grid):
        key = trial_key(point, dataset_id, protocol)
        if key in planned:
            continue
        planned.add(key)
        path = out_dir / f"{key}.json"
        if path.exists():
            existing = TrialRecord.from_dict(json.loads(path.read_text()))
            if existing.status == "ok":
                continue
        plan.append((point, key))
    if config.workers > 1 and len(plan) > 1:
        args = [(config.to_dict(), point, key) for point, key in plan]
        with ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_worker_init,
            initargs=(config.data_dir,),
        ) as pool:
            list(pool.map(_worker_run, args))
    else:
        for point, key in plan:
            record = run_trial(sd, config, point, key)
            _atomic_write(out_dir / f"{key}.json", json.dumps(record.to_dict()))
    records = load_records(out_dir)
    _write_index(out_dir, records)
    return records
