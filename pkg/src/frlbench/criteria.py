"""Benchmark validation: accept or reject candidate transfer tasks.

Four criteria gate a benchmark:

* C1 (size): enough samples overall and at least ``min_tasks`` accepted
  tasks.
* C2 (baseline fairness): the unfair baseline's DP distance on the task must
  fall inside ``[dp_low, dp_high]`` — too little means no discrimination to
  mitigate, too much means no achievable trade-off.
* C3 (correlation spread): at least one accepted non-proxy task must be
  approximately uncorrelated with the proxy (SMC within
  ``uncorrelated_band`` of 0.5).
* C4 (difficulty): unfair-baseline accuracy inside ``[acc_low, acc_high]``
  and more than ``mb_gap`` above the majority baseline.

A task is accepted iff C2 and C4 pass; the benchmark is accepted iff C1 and
C3 pass over the accepted tasks. Statistics are computed on the test split;
the unfair baseline uses the same downstream classifier as the evaluation
harness (pluggable via ``trainer``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .classifier import ClassifierParams, train_classifier
from .dataset import SplitDataset
from .errors import UnknownTaskError
from .evaluation import unfair_baseline
from .metrics import majority_accuracy, smc


@dataclass(frozen=True)
class CriteriaThresholds:
    """Numeric gates for the four criteria.

    ``min_samples`` has no canonical value; 10,000 is a toolkit default.
    """

    min_samples: int = 10_000
    min_tasks: int = 2
    dp_low: float = 0.05
    dp_high: float = 0.5
    uncorrelated_band: float = 0.05
    acc_low: float = 0.70
    acc_high: float = 0.90
    mb_gap: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.dp_low < self.dp_high <= 1.0:
            raise ValueError("need 0 <= dp_low < dp_high <= 1")
        if not 0.5 < self.acc_low < self.acc_high <= 1.0:
            raise ValueError("need 0.5 < acc_low < acc_high <= 1")
        if self.mb_gap <= 0:
            raise ValueError("mb_gap must be positive")
        if self.min_tasks < 2:
            raise ValueError("min_tasks must be >= 2")

    def to_dict(self) -> dict:
        return {
            "min_samples": self.min_samples,
            "min_tasks": self.min_tasks,
            "dp_low": self.dp_low,
            "dp_high": self.dp_high,
            "uncorrelated_band": self.uncorrelated_band,
            "acc_low": self.acc_low,
            "acc_high": self.acc_high,
            "mb_gap": self.mb_gap,
        }


@dataclass(frozen=True)
class TaskStats:
    """Raw measured statistics of one candidate task (thresholds not applied)."""

    name: str
    smc_with_proxy: float
    ub_accuracy: float
    ub_dp: float
    mb_accuracy: float
    degenerate: bool = False  # single class in the training labels


@dataclass(frozen=True)
class TaskRecord:
    """One task's statistics plus its pass/fail verdicts."""

    stats: TaskStats
    is_proxy: bool
    c2_pass: bool
    c4_pass: bool
    accepted: bool
    reasons: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.stats.name


@dataclass(frozen=True)
class CriteriaReport:
    """Machine-readable benchmark validation result."""

    proxy: str
    n_train: int
    n_test: int
    records: tuple[TaskRecord, ...]
    thresholds: CriteriaThresholds
    c1_pass: bool
    c3_pass: bool

    @property
    def accepted(self) -> bool:
        return self.c1_pass and self.c3_pass

    def record(self, task: str) -> TaskRecord:
        for rec in self.records:
            if rec.name == task:
                return rec
        raise UnknownTaskError(f"no record for task {task!r}")

    def to_dict(self) -> dict:
        return {
            "proxy": self.proxy,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "thresholds": self.thresholds.to_dict(),
            "c1_pass": self.c1_pass,
            "c3_pass": self.c3_pass,
            "accepted": self.accepted,
            "tasks": [
                {
                    "name": r.name,
                    "is_proxy": r.is_proxy,
                    "smc_with_proxy": r.stats.smc_with_proxy,
                    "ub_accuracy": r.stats.ub_accuracy,
                    "ub_dp": r.stats.ub_dp,
                    "mb_accuracy": r.stats.mb_accuracy,
                    "degenerate": r.stats.degenerate,
                    "c2_pass": r.c2_pass,
                    "c4_pass": r.c4_pass,
                    "accepted": r.accepted,
                    "reasons": list(r.reasons),
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CriteriaReport":
        records = tuple(
            TaskRecord(
                stats=TaskStats(
                    name=t["name"],
                    smc_with_proxy=t["smc_with_proxy"],
                    ub_accuracy=t["ub_accuracy"],
                    ub_dp=t["ub_dp"],
                    mb_accuracy=t["mb_accuracy"],
                    degenerate=t["degenerate"],
                ),
                is_proxy=t["is_proxy"],
                c2_pass=t["c2_pass"],
                c4_pass=t["c4_pass"],
                accepted=t["accepted"],
                reasons=tuple(t["reasons"]),
            )
            for t in data["tasks"]
        )
        return cls(
            proxy=data["proxy"],
            n_train=data["n_train"],
            n_test=data["n_test"],
            records=records,
            thresholds=CriteriaThresholds(**data["thresholds"]),
            c1_pass=data["c1_pass"],
            c3_pass=data["c3_pass"],
        )

    @classmethod
    def from_json(cls, text: str) -> "CriteriaReport":
        return cls.from_dict(json.loads(text))


def judge_task(stats: TaskStats, thresholds: CriteriaThresholds,
               is_proxy: bool) -> TaskRecord:
    """Apply C2/C4 thresholds to one task's measured statistics."""
    t = thresholds
    reasons = []
    if stats.degenerate:
        reasons.append("degenerate task: single class in training labels")
        return TaskRecord(stats, is_proxy, False, False, False, tuple(reasons))
    c2 = t.dp_low <= stats.ub_dp <= t.dp_high
    if stats.ub_dp < t.dp_low:
        reasons.append("dp below dp_low")
    elif stats.ub_dp > t.dp_high:
        reasons.append("dp above dp_high")
    c4 = (t.acc_low <= stats.ub_accuracy <= t.acc_high
          and stats.ub_accuracy - stats.mb_accuracy > t.mb_gap)
    if stats.ub_accuracy < t.acc_low:
        reasons.append("accuracy below acc_low")
    elif stats.ub_accuracy > t.acc_high:
        reasons.append("accuracy above acc_high")
    if stats.ub_accuracy - stats.mb_accuracy <= t.mb_gap:
        reasons.append("accuracy within mb_gap of the majority baseline")
    return TaskRecord(stats, is_proxy, c2, c4, c2 and c4, tuple(reasons))


def build_report(
    stats: list[TaskStats],
    proxy: str,
    n_train: int,
    n_test: int,
    thresholds: CriteriaThresholds,
) -> CriteriaReport:
    """Pure threshold application; separate from measurement for testability."""
    if proxy not in {s.name for s in stats}:
        raise UnknownTaskError(f"proxy {proxy!r} not among the measured tasks")
    records = tuple(
        judge_task(s, thresholds, s.name == proxy)
        for s in sorted(stats, key=lambda s: s.name)
    )
    accepted = [r for r in records if r.accepted]
    c1 = (n_train + n_test >= thresholds.min_samples
          and len(accepted) >= thresholds.min_tasks)
    c3 = any(
        abs(r.stats.smc_with_proxy - 0.5) <= thresholds.uncorrelated_band
        for r in accepted
        if not r.is_proxy
    )
    return CriteriaReport(
        proxy=proxy,
        n_train=n_train,
        n_test=n_test,
        records=records,
        thresholds=thresholds,
        c1_pass=c1,
        c3_pass=c3,
    )


def measure_task_stats(
    sd: SplitDataset,
    proxy: str,
    params: ClassifierParams,
    n_runs: int = 5,
    trainer=train_classifier,
) -> list[TaskStats]:
    """Measure SMC, unfair-baseline, and majority-baseline stats per task."""
    if proxy not in sd.train.tasks:
        raise UnknownTaskError(f"proxy {proxy!r} not in dataset")
    stats = []
    for name in sorted(sd.train.tasks):
        y_train = sd.train.tasks[name]
        y_test = sd.test.tasks[name]
        correlation = smc(y_test, sd.test.tasks[proxy])
        if len(set(y_train.tolist())) < 2:
            stats.append(TaskStats(name, correlation, 0.0, 0.0, 0.0, degenerate=True))
            continue
        ub = unfair_baseline(sd, name, params, n_runs=n_runs, trainer=trainer)
        stats.append(
            TaskStats(
                name=name,
                smc_with_proxy=correlation,
                ub_accuracy=ub.mean_accuracy,
                ub_dp=ub.max_dp,
                mb_accuracy=majority_accuracy(y_train, y_test),
            )
        )
    return stats


def evaluate_criteria(
    sd: SplitDataset,
    proxy: str,
    thresholds: CriteriaThresholds | None = None,
    params: ClassifierParams | None = None,
    n_runs: int = 5,
    trainer=train_classifier,
) -> CriteriaReport:
    """Measure every candidate task and apply the acceptance thresholds."""
    thresholds = thresholds or CriteriaThresholds()
    params = params or ClassifierParams()
    stats = measure_task_stats(sd, proxy, params, n_runs=n_runs, trainer=trainer)
    return build_report(stats, proxy, sd.train.n, sd.test.n, thresholds)


def select_tasks(report: CriteriaReport) -> list[str]:
    """Accepted transfer tasks, sorted by descending correlation with the proxy."""
    chosen = [r for r in report.records if r.accepted and not r.is_proxy]
    chosen.sort(key=lambda r: (-r.stats.smc_with_proxy, r.name))
    return [r.name for r in chosen]


def render_table(report: CriteriaReport) -> str:
    """Fixed-width table of the per-task statistics and verdicts."""
    header = ("Task", "UB Fairness", "SMC with y_p", "UB Accuracy",
              "MB Accuracy", "Accepted")
    ordered = sorted(report.records,
                     key=lambda r: (not r.is_proxy, -r.stats.smc_with_proxy))
    rows = [
        (
            r.name,
            f"{r.stats.ub_dp:.3f}",
            f"{100 * r.stats.smc_with_proxy:.1f}%",
            f"{100 * r.stats.ub_accuracy:.1f}%",
            f"{100 * r.stats.mb_accuracy:.1f}%",
            "yes" if r.accepted else "no (" + "; ".join(r.reasons) + ")",
        )
        for r in ordered
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(widths[i]) for i, c in enumerate(row))
                 for row in rows)
    lines.append("")
    lines.append(
        f"n_train={report.n_train} n_test={report.n_test} "
        f"C1={'pass' if report.c1_pass else 'FAIL'} "
        f"C3={'pass' if report.c3_pass else 'FAIL'} "
        f"benchmark={'ACCEPTED' if report.accepted else 'REJECTED'}"
    )
    return "\n".join(lines)


def render_csv(report: CriteriaReport) -> str:
    """Statistics table as CSV (same columns as the text table)."""
    lines = ["Task,UB Fairness,SMC with y_p,UB Accuracy,MB Accuracy,Accepted"]
    ordered = sorted(report.records,
                     key=lambda r: (not r.is_proxy, -r.stats.smc_with_proxy))
    for r in ordered:
        lines.append(
            f"{r.name},{r.stats.ub_dp:.6f},{r.stats.smc_with_proxy:.6f},"
            f"{r.stats.ub_accuracy:.6f},{r.stats.mb_accuracy:.6f},"
            f"{int(r.accepted)}"
        )
    return "\n".join(lines) + "\n"
