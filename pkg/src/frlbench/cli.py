"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 benchmark failed the
validation criteria.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .classifier import ClassifierParams
from .criteria import (
    CriteriaReport,
    CriteriaThresholds,
    evaluate_criteria,
    render_csv,
    render_table,
)
from .dataset import (
    fit_normalize,
    load_dataset,
    load_split,
    normalize_matrix,
    save_dataset,
    save_split,
    split,
)
from .errors import DataError, FrlBenchError
from .evaluation import evaluate_protocol, load_representations
from .fare import FareTree, build_tree
from .ingest import AcsFilterSpec, ingest_acs, ingest_health
from .pareto import emit_report
from .sweep import (
    TREE_KINDS,
    SweepConfig,
    encoder_params,
    load_records,
    run_sweep,
)
from .synth import SynthSpec, make_synth_benchmark, synth_generate

USAGE_EXIT = 1
DATA_EXIT = 2
CRITERIA_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _classifier_params(path: str | None) -> ClassifierParams:
    if path is None:
        return ClassifierParams()
    return ClassifierParams(**json.loads(Path(path).read_text()))


def cmd_synth(args) -> int:
    if args.preset:
        data, spec = make_synth_benchmark(seed=args.seed, n=args.n)
    else:
        spec = SynthSpec.load(args.spec)
        data = synth_generate(spec)
    out = Path(args.out)
    save_dataset(data, out)
    (out / "synth_spec.json").write_text(spec.to_json())
    print(f"wrote {data.n} rows, {data.n_features} features, "
          f"{len(data.tasks)} tasks to {out}")
    return 0


def cmd_ingest_acs(args) -> int:
    spec = AcsFilterSpec()
    data = ingest_acs(args.csv, spec)
    save_dataset(data, args.out)
    print(f"wrote {data.n} rows, {data.n_features} features to {args.out}")
    return 0


def cmd_ingest_health(args) -> int:
    data = ingest_health(args.csv)
    save_dataset(data, args.out)
    print(f"wrote {data.n} rows, {data.n_features} features to {args.out}")
    return 0


def cmd_split(args) -> int:
    data = load_dataset(args.data)
    sd = split(data, args.test_fraction, args.seed)
    save_split(sd, args.data)
    print(f"train {sd.train.n} rows, test {sd.test.n} rows "
          f"(seed {args.seed}, fraction {args.test_fraction})")
    return 0


def cmd_validate(args) -> int:
    sd = load_split(args.data)
    thresholds = CriteriaThresholds()
    if args.thresholds:
        thresholds = CriteriaThresholds(
            **json.loads(Path(args.thresholds).read_text())
        )
    report = evaluate_criteria(
        sd, args.proxy,
        thresholds=thresholds,
        params=_classifier_params(args.params),
        n_runs=args.n_runs,
    )
    out_dir = Path(args.out or args.data)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "criteria_report.json").write_text(report.to_json())
    (out_dir / "criteria_report.csv").write_text(render_csv(report))
    print(render_table(report))
    return 0 if report.accepted else CRITERIA_EXIT


def cmd_train(args) -> int:
    point = json.loads(Path(args.params).read_text()) if args.params else {}
    params = encoder_params(args.encoder, point)
    sd = load_split(args.data)
    tree = build_tree(sd.train, args.task, params)
    tree.save(args.out)
    print(f"built {tree.n_leaves}-leaf tree on {sd.train.n} rows -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    sd = load_split(args.data)
    tasks = [t.strip() for t in args.tasks.split(",") if t.strip()]
    if not tasks:
        raise DataError("--tasks must name at least one task")
    for task in tasks:
        if task not in sd.train.tasks:
            raise DataError(f"task {task!r} not in dataset")
    if args.model:
        tree = FareTree.load(args.model)
        reps_train = tree.encode_matrix(sd.train.features)
        reps_test = tree.encode_matrix(sd.test.features)
        source = {"encoder": "model", "path": str(args.model)}
    else:
        reps_train = load_representations(args.reps_train)
        reps_test = load_representations(args.reps_test)
        if len(reps_train) != sd.train.n or len(reps_test) != sd.test.n:
            raise DataError(
                "representation files do not match the split row counts"
            )
        source = {"encoder": "external"}
    stats = fit_normalize(reps_train)
    reps_train = normalize_matrix(reps_train, stats)
    reps_test = normalize_matrix(reps_test, stats)
    params = _classifier_params(args.params)
    points = []
    for task in tasks:
        point = evaluate_protocol(
            reps_train, reps_test,
            sd.train.tasks[task], sd.test.tasks[task], sd.test.sensitive,
            params, n_runs=args.n_runs, task=task, encoder_config=source,
            n_groups=sd.train.n_groups,
        )
        points.append(point.to_dict())
    text = json.dumps(points, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_sweep(args) -> int:
    config = SweepConfig.load(args.config)
    if args.workers:
        config = SweepConfig.from_dict({**config.to_dict(), "workers": args.workers})
    records = run_sweep(config)
    ok = sum(1 for r in records if r.status == "ok")
    print(f"{len(records)} trials in store ({ok} ok, {len(records) - ok} failed)")
    return 0


def cmd_pareto(args) -> int:
    records = load_records(args.records)
    if args.baselines:
        baselines_path = Path(args.baselines)
    else:
        baselines_path = Path(args.records) / "criteria_report.json"
        if not baselines_path.exists():
            raise DataError(
                "no --baselines given and no criteria_report.json in the "
                "records directory (run `validate` and pass its report)"
            )
    baselines = CriteriaReport.from_json(baselines_path.read_text())
    manifest = emit_report(records, baselines, args.out, plot=args.plot)
    print(f"wrote {len(manifest['tasks'])} task fronts to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="frlbench", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", help="synthetic spec JSON file")
    group.add_argument("--preset", choices=["benchmark"],
                       help="built-in calibrated benchmark (proxy + 3 transfer tasks)")
    p.add_argument("--seed", type=int, default=0, help="seed for --preset")
    p.add_argument("--n", type=int, default=20_000, help="rows for --preset")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest-acs", help="build the census benchmark from raw PUMS")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ingest_acs)

    p = sub.add_parser("ingest-health",
                       help="build the health benchmark from a per-patient table")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ingest_health)

    p = sub.add_parser("split", help="deterministic train/test split of a dataset dir")
    p.add_argument("--data", required=True)
    p.add_argument("--test-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("validate", help="check tasks against the benchmark criteria")
    p.add_argument("--data", required=True)
    p.add_argument("--proxy", required=True)
    p.add_argument("--thresholds", help="criteria thresholds JSON file")
    p.add_argument("--params", help="classifier params JSON file")
    p.add_argument("--n-runs", type=int, default=5)
    p.add_argument("--out", help="report directory (default: the data dir)")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("train", help="build a tree encoder on the train split")
    p.add_argument("--data", required=True)
    p.add_argument("--encoder", required=True, choices=TREE_KINDS)
    p.add_argument("--task", help="training task (required when lambda_y > 0)")
    p.add_argument("--params", help="hyperparameter JSON file")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate",
                       help="trade-off points of a model or representation files")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="tree model JSON")
    p.add_argument("--reps-train", help="external representations (train rows)")
    p.add_argument("--reps-test", help="external representations (test rows)")
    p.add_argument("--tasks", required=True, help="comma-separated task names")
    p.add_argument("--params", help="classifier params JSON file")
    p.add_argument("--n-runs", type=int, default=5)
    p.add_argument("--out", help="write the JSON here instead of stdout")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="run or resume a hyperparameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, help="override the config worker count")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("pareto", help="emit per-task Pareto front reports")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baselines", help="criteria report JSON with baseline stats")
    p.add_argument("--plot", action="store_true", help="also render SVG plots")
    p.set_defaults(fn=cmd_pareto)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate":
        has_model = args.model is not None
        has_reps = args.reps_train is not None and args.reps_test is not None
        if has_model == has_reps:
            parser.error("evaluate needs --model or (--reps-train and --reps-test)")
    try:
        return args.fn(args)
    except FrlBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
