"""Pareto-front extraction and plot-ready report emission.

Point A dominates B when A has accuracy at least B's and DP distance at most
B's, with at least one strict inequality. The front is the non-dominated set,
reported in ascending DP order. Reports are one CSV per task (front points
plus the unfair/majority baseline reference rows), ordered by descending
correlation with the proxy task, plus a JSON manifest; an optional vector
rendering shades the region more unfair than the unfair baseline.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .criteria import CriteriaReport
from .errors import MissingBaselineError
from .evaluation import TradeoffPoint
from .sweep import TrialRecord


def dominates(a: TradeoffPoint, b: TradeoffPoint) -> bool:
    return (
        a.mean_accuracy >= b.mean_accuracy
        and a.max_dp <= b.max_dp
        and (a.mean_accuracy > b.mean_accuracy or a.max_dp < b.max_dp)
    )


def pareto_front(points: list[TradeoffPoint]) -> list[TradeoffPoint]:
    """Non-dominated subset, sorted by ascending DP distance.

    Exact duplicates of a front point are kept (neither dominates the other).
    """
    if not points:
        return []
    tasks = {p.task for p in points}
    if len(tasks) > 1:
        raise ValueError(f"points span multiple tasks: {sorted(tasks)}")
    ordered = sorted(points, key=lambda p: (p.max_dp, -p.mean_accuracy))
    front: list[TradeoffPoint] = []
    best_acc = -1.0
    best_dp = -1.0
    for p in ordered:
        if p.mean_accuracy > best_acc:
            front.append(p)
            best_acc = p.mean_accuracy
            best_dp = p.max_dp
        elif p.mean_accuracy == best_acc and p.max_dp == best_dp:
            front.append(p)  # exact duplicate of the current best
    return front


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "task"


def collect_points(records: list[TrialRecord]) -> dict[str, list[TradeoffPoint]]:
    """Per-task trade-off points from the successful trials."""
    out: dict[str, list[TradeoffPoint]] = {}
    for record in records:
        if record.status != "ok":
            continue
        for task, point in record.points.items():
            out.setdefault(task, []).append(point)
    return out


def emit_report(
    records: list[TrialRecord],
    baselines: CriteriaReport,
    out_dir,
    plot: bool = False,
) -> dict:
    """Write per-task front CSVs (+ manifest, optional SVGs); returns the manifest.

    Every evaluated task must have a baseline record; tasks are ordered by
    descending SMC with the proxy.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_task = collect_points(records)
    known = {r.name: r for r in baselines.records}
    for task in per_task:
        if task not in known:
            raise MissingBaselineError(f"no baseline record for task {task!r}")
    ordered = sorted(per_task, key=lambda t: -known[t].stats.smc_with_proxy)
    manifest = {"tasks": []}
    for rank, task in enumerate(ordered):
        base = known[task].stats
        front = pareto_front(per_task[task])
        filename = f"{rank:02d}_{_slug(task)}.csv"
        lines = ["kind,max_dp,mean_accuracy"]
        lines.extend(
            f"point,{p.max_dp!r},{p.mean_accuracy!r}" for p in front
        )
        lines.append(f"unfair_baseline,{base.ub_dp!r},{base.ub_accuracy!r}")
        lines.append(f"majority_baseline,,{base.mb_accuracy!r}")
        (out_dir / filename).write_text("\n".join(lines) + "\n")
        manifest["tasks"].append(
            {
                "task": task,
                "file": filename,
                "smc_with_proxy": base.smc_with_proxy,
                "n_candidates": len(per_task[task]),
                "n_front": len(front),
            }
        )
        if plot:
            _plot_front(out_dir / f"{rank:02d}_{_slug(task)}.svg",
                        task, front, base)
    (out_dir / "report.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def _plot_front(path: Path, task: str, front, base) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    xs = [p.max_dp for p in front]
    ys = [p.mean_accuracy for p in front]
    ax.plot(xs, ys, "o-", label="pareto front")
    ax.axvline(base.ub_dp, color="gray", linestyle="--", linewidth=1)
    ax.axhline(base.ub_accuracy, color="gray", linestyle="--", linewidth=1,
               label="unfair baseline")
    ax.axhline(base.mb_accuracy, color="black", linestyle=":", linewidth=1,
               label="majority baseline")
    upper = max([base.ub_dp] + xs) * 1.1 + 1e-3
    ax.axvspan(base.ub_dp, upper, color="red", alpha=0.12)
    ax.set_xlabel("DP distance")
    ax.set_ylabel("accuracy")
    ax.set_title(f"{task} (SMC {100 * base.smc_with_proxy:.1f}%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
