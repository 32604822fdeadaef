import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frlbench.classifier import ClassifierParams
from frlbench.dataset import Dataset, split
from frlbench.errors import DataError, UnknownTaskError
from frlbench.evaluation import (
    RunResult,
    TradeoffPoint,
    evaluate_protocol,
    load_representations,
    save_representations,
    unfair_baseline,
)


class StubClassifier:
    def __init__(self, preds):
        self.preds = np.asarray(preds)

    def predict(self, X):
        return self.preds[: len(X)]


def stub_trainer_from_table(table):
    """table: seed -> predictions returned for any test matrix."""

    def trainer(reps_train, labels_train, params):
        return StubClassifier(table[params.seed])

    return trainer


class TestTradeoffPoint:
    def test_from_runs_aggregation(self):
        runs = [RunResult(a, d) for a, d in
                zip([0.8, 0.9, 0.7, 0.8, 0.8], [0.1, 0.2, 0.05, 0.1, 0.1])]
        pt = TradeoffPoint.from_runs("t", {}, runs)
        assert pt.mean_accuracy == pytest.approx(0.80, abs=1e-15)
        assert pt.max_dp == pytest.approx(0.20, abs=1e-15)

    def test_inconsistent_aggregates_rejected(self):
        with pytest.raises(ValueError):
            TradeoffPoint("t", {}, 0.5, 0.1, (RunResult(0.9, 0.1),))

    def test_dict_roundtrip(self):
        pt = TradeoffPoint.from_runs(
            "t", {"gamma": 0.5}, [RunResult(0.8, 0.1), RunResult(0.6, 0.3)]
        )
        back = TradeoffPoint.from_dict(pt.to_dict())
        assert back == pt

    @settings(max_examples=100, deadline=None)
    @given(st.lists(
        st.tuples(st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False)),
        min_size=1, max_size=12,
    ))
    def test_aggregation_invariants_property(self, pairs):
        runs = [RunResult(a, d) for a, d in pairs]
        pt = TradeoffPoint.from_runs("t", {}, runs)
        assert pt.mean_accuracy == pytest.approx(
            sum(a for a, _ in pairs) / len(pairs), abs=1e-12)
        assert pt.max_dp == max(d for _, d in pairs)


class TestEvaluateProtocol:
    def test_stubbed_aggregation(self):
        # seeds 0..4 produce fixed prediction vectors; labels/groups chosen so
        # the accuracies are [0.8, 0.9, 0.7, 0.8, 0.8], dps [0.1, .2, .05, .1, .1]
        rng = np.random.default_rng(0)
        n = 200
        labels = rng.integers(0, 2, n)
        groups = np.r_[0, 1, rng.integers(0, 2, n - 2)]
        table = {}
        target = [(0.8, None), (0.9, None), (0.7, None), (0.8, None), (0.8, None)]
        for seed, (acc, _) in enumerate(target):
            preds = labels.copy()
            flip = rng.permutation(n)[: int(round((1 - acc) * n))]
            preds[flip] = 1 - preds[flip]
            table[seed] = preds
        reps = np.zeros((n, 3))
        pt = evaluate_protocol(
            reps, reps, labels, labels, groups,
            ClassifierParams(seed=0), n_runs=5,
            trainer=stub_trainer_from_table(table),
        )
        accs = [r.accuracy for r in pt.per_run]
        assert accs == pytest.approx([0.8, 0.9, 0.7, 0.8, 0.8])
        assert pt.mean_accuracy == pytest.approx(np.mean(accs))
        assert pt.max_dp == max(r.dp for r in pt.per_run)

    def test_single_run_identity(self):
        labels = np.array([0, 1, 0, 1])
        groups = np.array([0, 0, 1, 1])
        table = {7: np.array([0, 1, 1, 1])}
        pt = evaluate_protocol(
            np.zeros((4, 1)), np.zeros((4, 1)), labels, labels, groups,
            ClassifierParams(seed=7), n_runs=1,
            trainer=stub_trainer_from_table(table),
        )
        assert pt.mean_accuracy == pt.per_run[0].accuracy == 0.75
        assert pt.max_dp == pt.per_run[0].dp

    def test_protocol_determinism(self):
        rng = np.random.default_rng(1)
        reps_tr = rng.normal(size=(120, 3))
        reps_te = rng.normal(size=(60, 3))
        y_tr = rng.integers(0, 2, 120)
        y_te = rng.integers(0, 2, 60)
        g_te = np.r_[0, 1, rng.integers(0, 2, 58)]
        p = ClassifierParams(epochs=3, seed=5)
        a = evaluate_protocol(reps_tr, reps_te, y_tr, y_te, g_te, p, n_runs=3)
        b = evaluate_protocol(reps_tr, reps_te, y_tr, y_te, g_te, p, n_runs=3)
        assert a == b

    def test_constant_representation_dp_zero(self):
        rng = np.random.default_rng(2)
        n = 600
        y = (rng.random(n) < 0.62).astype(int)
        g = np.r_[0, 1, rng.integers(0, 2, n - 2)]
        reps = np.zeros((n, 4))
        pt = evaluate_protocol(
            reps, reps, y, y, g, ClassifierParams(epochs=10), n_runs=2
        )
        majority_rate = max(y.mean(), 1 - y.mean())
        assert pt.mean_accuracy == pytest.approx(majority_rate, abs=0.01)
        assert pt.max_dp == 0.0

    def test_max_dp_nondecreasing_and_variance_shrinks(self):
        rng = np.random.default_rng(3)
        n_draws = 50
        counts = [1, 2, 5, 10]
        means = {k: [] for k in counts}
        for _ in range(n_draws):
            accs = rng.random(10)
            dps = rng.random(10)
            runs = [RunResult(a, d) for a, d in zip(accs, dps)]
            prev_max = 0.0
            for k in counts:
                pt = TradeoffPoint.from_runs("t", {}, runs[:k])
                assert pt.max_dp >= prev_max
                prev_max = pt.max_dp
                means[k].append(pt.mean_accuracy)
        variances = [np.var(means[k]) for k in counts]
        assert variances[-1] < variances[0]


class TestUnfairBaseline:
    def test_independent_groups_low_dp(self):
        # sensitive attribute independent of features: dp stays below 0.05
        # (group positive-rate gap has sd ~0.013 at this test-set size)
        rng = np.random.default_rng(4)
        n = 20000
        x = rng.normal(size=(n, 5))
        s = np.r_[0, 1, rng.integers(0, 2, n - 2)]
        y = (x[:, 0] > 0).astype(int)
        d = Dataset(x, s, {"t": y}, tuple(f"x{j}" for j in range(5)))
        sd = split(d, 0.3, seed=0)
        pt = unfair_baseline(sd, "t", ClassifierParams(epochs=8), n_runs=2)
        assert pt.max_dp < 0.05
        assert pt.mean_accuracy > 0.9

    def test_unknown_task(self):
        d = Dataset(np.zeros((4, 1)), [0, 1, 0, 1], {"t": [0, 1, 0, 1]}, ("x",))
        sd = split(d, 0.5, seed=0)
        with pytest.raises(UnknownTaskError):
            unfair_baseline(sd, "nope", ClassifierParams())


class TestRepresentationFiles:
    def test_roundtrip(self, tmp_path):
        reps = np.random.default_rng(0).normal(size=(40, 3))
        path = tmp_path / "reps.csv"
        save_representations(path, reps)
        back = load_representations(path)
        assert back.tobytes() == reps.tobytes()

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="z0"):
            load_representations(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("z0,z1\n1,x\n")
        with pytest.raises(DataError):
            load_representations(path)
