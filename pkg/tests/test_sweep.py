import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frlbench.classifier import ClassifierParams
from frlbench.criteria import CriteriaThresholds, TaskStats, build_report
from frlbench.dataset import save_split, split
from frlbench.errors import MissingBaselineError, UnknownTaskError
from frlbench.evaluation import (
    RunResult,
    TradeoffPoint,
    save_representations,
)
from frlbench.pareto import collect_points, dominates, emit_report, pareto_front
from frlbench.sweep import (
    FARE_PRESET_GRID,
    SweepConfig,
    encoder_params,
    expand_grid,
    run_sweep,
    trial_key,
)
from frlbench.synth import SynthSpec, synth_generate


def pt(acc, dp, task="t"):
    return TradeoffPoint.from_runs(task, {}, [RunResult(acc, dp)])


def pareto_oracle(points):
    """O(n^2) all-pairs domination check."""
    out = []
    for p in points:
        if not any(dominates(q, p) for q in points):
            out.append(p)
    return out


class TestParetoFront:
    def test_strict_domination(self):
        front = pareto_front([pt(0.8, 0.1), pt(0.7, 0.2)])
        assert [(p.mean_accuracy, p.max_dp) for p in front] == [(0.8, 0.1)]

    def test_incomparable_pair_retained(self):
        front = pareto_front([pt(0.8, 0.1), pt(0.75, 0.05)])
        assert len(front) == 2
        assert [p.max_dp for p in front] == [0.05, 0.1]  # ascending dp

    def test_empty(self):
        assert pareto_front([]) == []

    def test_duplicates_kept(self):
        front = pareto_front([pt(0.8, 0.1), pt(0.8, 0.1)])
        assert len(front) == 2

    def test_mixed_tasks_rejected(self):
        with pytest.raises(ValueError):
            pareto_front([pt(0.8, 0.1, "a"), pt(0.7, 0.2, "b")])

    def test_matches_oracle_on_random_points(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            points = [
                pt(round(rng.random(), 2), round(rng.random(), 2))
                for _ in range(200)
            ]
            got = pareto_front(points)
            want = pareto_oracle(points)
            key = lambda p: (p.max_dp, p.mean_accuracy)
            assert sorted(map(key, got)) == sorted(map(key, want))
            # mutually non-dominated; every excluded point dominated
            for p in got:
                assert not any(dominates(q, p) for q in got)
            excluded = [p for p in points if p not in got]
            for p in excluded:
                assert any(dominates(q, p) for q in got)


class TestGrid:
    def test_cartesian_product_count(self):
        grid = {"gamma": [0.0, 0.5, 1.0], "max_leaves": [2, 50]}
        points = expand_grid(grid)
        assert len(points) == 6
        assert {frozenset(p.items()) for p in points} == {
            frozenset({("gamma", g), ("max_leaves", k)})
            for g in (0.0, 0.5, 1.0) for k in (2, 50)
        }

    def test_empty_grid_single_point(self):
        assert expand_grid({}) == [{}]

    def test_fare_preset_covers_published_ranges(self):
        assert FARE_PRESET_GRID["gamma"][0] == 0.0
        assert FARE_PRESET_GRID["gamma"][-1] == 1.0
        assert len(FARE_PRESET_GRID["gamma"]) == 11
        assert FARE_PRESET_GRID["max_leaves"][0] == 2
        assert FARE_PRESET_GRID["max_leaves"][-1] == 200
        p = encoder_params("fare", {"gamma": 0.3, "max_leaves": 50})
        assert p.min_leaf_samples == 100
        assert p.val_fraction == 0.3

    def test_encoder_params_rec_modes(self):
        p = encoder_params("fare-rec", {"lambda_f": 0.1, "lambda_r": 10.0,
                                        "max_leaves": 400})
        assert p.weights.lambda_y == 0.0
        assert p.weights.rec_mode.value == "mean_squared"
        q = encoder_params("fare-rec-abs", {"lambda_f": 0.1, "lambda_r": 1.0})
        assert q.weights.rec_mode.value == "abs_median"

    @settings(max_examples=50, deadline=None)
    @given(st.lists(
        st.dictionaries(
            st.sampled_from(["gamma", "max_leaves", "lambda_r", "seed"]),
            st.integers(0, 1000),
            min_size=1, max_size=4,
        ),
        min_size=2, max_size=20, unique_by=lambda d: tuple(sorted(d.items())),
    ))
    def test_distinct_points_distinct_keys(self, points):
        keys = {trial_key(p, "ds", {"n_runs": 5}) for p in points}
        assert len(keys) == len(points)

    def test_key_depends_on_dataset_and_protocol(self):
        point = {"gamma": 0.5}
        a = trial_key(point, "ds1", {"n_runs": 5})
        b = trial_key(point, "ds2", {"n_runs": 5})
        c = trial_key(point, "ds1", {"n_runs": 3})
        assert len({a, b, c}) == 3


def make_split_dir(tmp_path, n=400, seed=0):
    w0 = np.zeros(3)
    w0[0] = 1.0
    w1 = np.zeros(3)
    w1[1] = 1.0
    spec = SynthSpec(
        n=n, d=3, group_prob=0.5, delta=0.8,
        task_weights={"a": w0, "b": w1},
        task_biases={"a": 0.0, "b": 0.0},
        label_noise=0.05, seed=seed,
    )
    sd = split(synth_generate(spec), 0.3, seed=1)
    data_dir = tmp_path / "data"
    save_split(sd, data_dir)
    return data_dir, sd


def fast_config(data_dir, out_dir, **overrides):
    base = dict(
        data_dir=str(data_dir),
        encoder="fare",
        out_dir=str(out_dir),
        eval_tasks=("a", "b"),
        train_task="a",
        grid={"gamma": [0.0, 0.5, 1.0], "max_leaves": [2, 4],
              "min_leaf_samples": [5], "val_fraction": [0.0]},
        classifier=ClassifierParams(epochs=2, hidden_size=8),
        n_runs=2,
    )
    base.update(overrides)
    return SweepConfig(**base)


class TestRunSweep:
    def test_grid_produces_one_record_per_point(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        config = fast_config(data_dir, tmp_path / "out")
        records = run_sweep(config)
        assert len(records) == 6
        assert all(r.status == "ok" for r in records)
        assert all(set(r.points) == {"a", "b"} for r in records)

    def test_resume_skips_completed(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        out_dir = tmp_path / "out"
        config = fast_config(data_dir, out_dir)
        run_sweep(config)
        files = sorted(out_dir.glob("*.json"))
        files = [f for f in files if f.name != "index.json"]
        mtimes = {f.name: f.stat().st_mtime_ns for f in files}
        removed = [f.name for f in files[:2]]
        for f in files[:2]:
            f.unlink()
        run_sweep(config)
        after = {
            f.name: f.stat().st_mtime_ns
            for f in out_dir.glob("*.json") if f.name != "index.json"
        }
        assert set(after) == set(mtimes)
        for name in mtimes:
            if name in removed:
                assert after[name] != mtimes[name]
            else:
                assert after[name] == mtimes[name]  # untouched

    def test_store_idempotent_modulo_wall_clock(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        config = fast_config(data_dir, tmp_path / "out")

        def snapshot():
            out = {}
            for f in Path(config.out_dir).glob("*.json"):
                if f.name == "index.json":
                    continue
                data = json.loads(f.read_text())
                data.pop("wall_seconds")
                out[f.name] = data
            return out

        run_sweep(config)
        first = snapshot()
        for f in Path(config.out_dir).glob("*.json"):
            f.unlink()
        run_sweep(config)
        assert snapshot() == first

    def test_worker_count_does_not_change_results(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        serial = fast_config(data_dir, tmp_path / "serial")
        parallel = fast_config(data_dir, tmp_path / "parallel", workers=3)
        run_sweep(serial)
        run_sweep(parallel)

        def snapshot(out_dir):
            out = {}
            for f in Path(out_dir).glob("*.json"):
                if f.name == "index.json":
                    continue
                data = json.loads(f.read_text())
                data.pop("wall_seconds")
                out[f.name] = data
            return out

        assert snapshot(serial.out_dir) == snapshot(parallel.out_dir)

    def test_unknown_eval_task_rejected(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        config = fast_config(data_dir, tmp_path / "out", eval_tasks=("a", "zzz"))
        with pytest.raises(UnknownTaskError):
            run_sweep(config)

    def test_failed_trial_recorded_not_raised(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        # min_leaf_samples larger than the training set: every build fails
        config = fast_config(
            data_dir, tmp_path / "out",
            grid={"gamma": [0.0, 0.5], "min_leaf_samples": [100000]},
        )
        records = run_sweep(config)
        assert len(records) == 2
        assert all(r.status == "failed" for r in records)
        assert all(r.error for r in records)
        # failed trials are retried on resume
        rerun = run_sweep(config)
        assert all(r.status == "failed" for r in rerun)

    def test_identity_encoder_single_trial(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        config = fast_config(
            data_dir, tmp_path / "out", encoder="identity", grid={},
            train_task=None,
            classifier=ClassifierParams(epochs=40, hidden_size=16),
        )
        records = run_sweep(config)
        assert len(records) == 1
        assert records[0].points["a"].mean_accuracy > 0.7

    def test_external_representations(self, tmp_path):
        data_dir, sd = make_split_dir(tmp_path)
        reps_train = tmp_path / "rt.csv"
        reps_test = tmp_path / "re.csv"
        save_representations(reps_train, sd.train.features[:, :2])
        save_representations(reps_test, sd.test.features[:, :2])
        config = fast_config(
            data_dir, tmp_path / "out", encoder="external", grid={},
            train_task=None, reps_train=str(reps_train), reps_test=str(reps_test),
        )
        records = run_sweep(config)
        assert len(records) == 1
        assert records[0].status == "ok"

    def test_train_on_eval_task_mode(self, tmp_path):
        data_dir, _ = make_split_dir(tmp_path)
        config = fast_config(
            data_dir, tmp_path / "out",
            grid={"gamma": [0.0], "max_leaves": [4]},
            train_task=None, train_on_eval_task=True,
        )
        records = run_sweep(config)
        assert records[0].points["a"].encoder_config["train_task"] == "a"
        assert records[0].points["b"].encoder_config["train_task"] == "b"

    def test_config_json_roundtrip(self, tmp_path):
        config = fast_config(tmp_path / "d", tmp_path / "o", workers=2)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        back = SweepConfig.load(path)
        assert back == config

    def test_grid_required_for_tree_encoders(self, tmp_path):
        with pytest.raises(ValueError):
            fast_config(tmp_path / "d", tmp_path / "o", grid={})


class TestEmitReport:
    def baselines(self):
        return build_report(
            [
                TaskStats("proxy", 1.0, 0.80, 0.065, 0.642),
                TaskStats("a", 0.86, 0.84, 0.066, 0.70),
                TaskStats("b", 0.55, 0.82, 0.054, 0.73),
                TaskStats("c", 0.81, 0.80, 0.055, 0.55),
            ],
            "proxy", 9000, 3000, CriteriaThresholds(),
        )

    def record_for(self, tasks_points, key="k1"):
        from frlbench.sweep import TrialRecord

        return TrialRecord(
            key=key,
            config_point={"gamma": 0.5},
            encoder="fare",
            points=tasks_points,
            wall_seconds=0.1,
            version="0.1.0",
            status="ok",
        )

    def test_csv_structure_and_ordering(self, tmp_path):
        records = [
            self.record_for({
                "a": pt(0.8, 0.1, "a"),
                "b": pt(0.7, 0.2, "b"),
                "c": pt(0.75, 0.15, "c"),
            })
        ]
        # more points on task a to give the front some shape
        records.append(self.record_for({
            "a": pt(0.75, 0.05, "a"),
            "b": pt(0.72, 0.1, "b"),
            "c": pt(0.6, 0.3, "c"),
        }, key="k2"))
        manifest = emit_report(records, self.baselines(), tmp_path / "rep")
        # ordering by descending smc: a (0.86), c (0.81), b (0.55)
        assert [t["task"] for t in manifest["tasks"]] == ["a", "c", "b"]
        files = sorted(p.name for p in (tmp_path / "rep").glob("*.csv"))
        assert files == ["00_a.csv", "01_c.csv", "02_b.csv"]
        lines = (tmp_path / "rep" / "00_a.csv").read_text().strip().splitlines()
        assert lines[0] == "kind,max_dp,mean_accuracy"
        kinds = [l.split(",")[0] for l in lines[1:]]
        assert kinds == ["point", "point", "unfair_baseline", "majority_baseline"]

    def test_dominated_points_absent(self, tmp_path):
        records = [
            self.record_for({"a": pt(0.8, 0.1, "a")}),
            self.record_for({"a": pt(0.7, 0.2, "a")}, key="k2"),  # dominated
        ]
        emit_report(records, self.baselines(), tmp_path / "rep")
        lines = (tmp_path / "rep" / "00_a.csv").read_text().strip().splitlines()
        points = [l for l in lines if l.startswith("point,")]
        assert len(points) == 1
        # cross-check with the oracle
        collected = collect_points(records)["a"]
        assert len(pareto_oracle(collected)) == 1

    def test_missing_baseline_errors(self, tmp_path):
        records = [self.record_for({"zzz": pt(0.8, 0.1, "zzz")})]
        with pytest.raises(MissingBaselineError):
            emit_report(records, self.baselines(), tmp_path / "rep")

    def test_failed_records_skipped(self, tmp_path):
        from frlbench.sweep import TrialRecord

        bad = TrialRecord(
            key="bad", config_point={}, encoder="fare", points={},
            wall_seconds=0.0, version="0.1.0", status="failed", error="boom",
        )
        records = [self.record_for({"a": pt(0.8, 0.1, "a")}), bad]
        manifest = emit_report(records, self.baselines(), tmp_path / "rep")
        assert manifest["tasks"][0]["n_candidates"] == 1

    def test_plot_svg_emitted(self, tmp_path):
        pytest.importorskip("matplotlib")
        records = [self.record_for({"a": pt(0.8, 0.1, "a")})]
        emit_report(records, self.baselines(), tmp_path / "rep", plot=True)
        assert (tmp_path / "rep" / "00_a.svg").exists()
