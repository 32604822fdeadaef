"""Restricted decision-tree encoders for fair representation learning.

A tree is grown greedily on the training features; every data point routed to
a leaf is then represented by that leaf's per-dimension median, so the number
of distinct representations is capped by the leaf budget.

The split quality of a candidate leaf is a weighted sum of three terms:

* ``lambda_y`` times the Gini impurity of the task labels (utility),
* ``lambda_f`` times ``(1 - 1/|S|) - Gini(s)`` where ``s`` is the sensitive
  group: mixing groups inside a leaf drives this toward zero, while
  separating them is penalized (fairness),
* ``lambda_r`` times a reconstruction error: mean squared distance to the
  leaf mean, or mean L1 distance to the leaf median (task-agnostic utility).

Candidates are midpoints between consecutive distinct values of each feature;
the split minimizing the size-weighted child criterion is chosen, and growth
is best-first: the leaf whose best split improves its criterion most is split
next, until the leaf budget is reached or no improving split remains.

Medians are always the lower median (the element at index ``(m - 1) // 2``
of the sorted values), so representations are actual observed values.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import Dataset, fit_normalize, normalize_matrix
from .errors import DimensionMismatchError, UnknownTaskError
from .metrics import gini
from .validation import as_binary_vector, as_float_matrix, as_group_vector

TREE_FORMAT_VERSION = 1

# a split must beat the parent criterion by more than this to count
GAIN_EPS = 1e-12


class RecMode(Enum):
    NONE = "none"
    MEAN_SQUARED = "mean_squared"
    ABS_MEDIAN = "abs_median"


def _as_rec_mode(value) -> RecMode:
    if isinstance(value, RecMode):
        return value
    return RecMode(str(value))


@dataclass(frozen=True)
class CriterionWeights:
    """Weights of the three split-criterion components."""

    lambda_y: float = 1.0
    lambda_f: float = 0.0
    lambda_r: float = 0.0
    rec_mode: RecMode = RecMode.NONE

    def __post_init__(self):
        object.__setattr__(self, "rec_mode", _as_rec_mode(self.rec_mode))
        if min(self.lambda_y, self.lambda_f, self.lambda_r) < 0:
            raise ValueError("criterion weights must be non-negative")
        if self.lambda_y == self.lambda_f == self.lambda_r == 0:
            raise ValueError("at least one criterion weight must be positive")
        if (self.rec_mode is RecMode.NONE) != (self.lambda_r == 0):
            raise ValueError("rec_mode must be 'none' exactly when lambda_r == 0")

    @classmethod
    def from_gamma(cls, gamma: float) -> "CriterionWeights":
        """Two-term weighting: (1 - gamma) on labels, gamma on fairness."""
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        return cls(lambda_y=1.0 - gamma, lambda_f=gamma, lambda_r=0.0)

    def to_dict(self) -> dict:
        return {
            "lambda_y": self.lambda_y,
            "lambda_f": self.lambda_f,
            "lambda_r": self.lambda_r,
            "rec_mode": self.rec_mode.value,
        }


@dataclass(frozen=True)
class FareParams:
    """Hyperparameters of one tree build."""

    weights: CriterionWeights = field(default_factory=CriterionWeights)
    max_leaves: int = 32
    min_leaf_samples: int = 1
    val_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")
        if self.min_leaf_samples < 1:
            raise ValueError("min_leaf_samples must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.to_dict(),
            "max_leaves": self.max_leaves,
            "min_leaf_samples": self.min_leaf_samples,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FareParams":
        return cls(
            weights=CriterionWeights(**data["weights"]),
            max_leaves=data["max_leaves"],
            min_leaf_samples=data["min_leaf_samples"],
            val_fraction=data["val_fraction"],
            seed=data["seed"],
        )


@dataclass(frozen=True)
class TreeNode:
    """One node: a (feature, threshold) split or a leaf reference."""

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    leaf: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.leaf >= 0


def lower_median(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Median that always returns an observed value: sorted[(m - 1) // 2]."""
    values = np.asarray(values)
    m = values.shape[axis]
    if m == 0:
        raise ValueError("median of an empty set")
    return np.sort(values, axis=axis).take((m - 1) // 2, axis=axis)


def _rec_error(rec: np.ndarray, mode: RecMode) -> float:
    m = rec.shape[0]
    if mode is RecMode.MEAN_SQUARED:
        centered = rec - rec.mean(axis=0)
        return float((centered * centered).sum() / m)
    if mode is RecMode.ABS_MEDIAN:
        med = lower_median(rec, axis=0)
        return float(np.abs(rec - med).sum() / m)
    return 0.0


def leaf_criterion(
    x: np.ndarray,
    y: np.ndarray | None,
    s: np.ndarray | None,
    weights: CriterionWeights,
    n_groups: int | None = None,
    rec_features: np.ndarray | None = None,
) -> float:
    """Weighted criterion of one leaf's rows (lower is better).

    ``n_groups`` should be the dataset-level group count; it defaults to the
    count observed in ``s``, which understates the fairness ceiling when a
    group is absent from the leaf. ``rec_features`` lets the reconstruction
    term run on a different (e.g. normalized) view of the same rows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    m = x.shape[0]
    if m == 0:
        raise ValueError("leaf_criterion of an empty row set")
    w = weights
    total = 0.0
    if w.lambda_y > 0:
        if y is None:
            raise ValueError("lambda_y > 0 requires task labels")
        total += w.lambda_y * gini(y)
    if w.lambda_f > 0:
        if s is None:
            raise ValueError("lambda_f > 0 requires sensitive groups")
        s = np.asarray(s)
        k = int(s.max()) + 1 if n_groups is None else int(n_groups)
        total += w.lambda_f * ((1.0 - 1.0 / k) - gini(s))
    if w.lambda_r > 0:
        rec = x if rec_features is None else np.asarray(rec_features, dtype=np.float64)
        total += w.lambda_r * _rec_error(rec, w.rec_mode)
    return total


def _prefix_abs_dev(values: np.ndarray) -> np.ndarray:
    """L1 deviation about the lower median of every prefix of ``values``.

    Exact two-heap running median; O(m log m). ``out[i]`` is the deviation of
    ``values[: i + 1]``.
    """
    lo: list[float] = []  # negated max-heap: lower half including the median
    hi: list[float] = []  # min-heap: upper half
    s_lo = 0.0
    s_hi = 0.0
    out = np.empty(len(values))
    for i, raw in enumerate(values):
        v = float(raw)
        if not lo or v <= -lo[0]:
            heapq.heappush(lo, -v)
            s_lo += v
        else:
            heapq.heappush(hi, v)
            s_hi += v
        if len(lo) > len(hi) + 1:
            moved = -heapq.heappop(lo)
            s_lo -= moved
            heapq.heappush(hi, moved)
            s_hi += moved
        elif len(hi) > len(lo):
            moved = heapq.heappop(hi)
            s_hi -= moved
            heapq.heappush(lo, -moved)
            s_lo += moved
        med = -lo[0]
        out[i] = (med * len(lo) - s_lo) + (s_hi - med * len(hi))
    return out


def _gini_terms(counts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Gini impurity per candidate from class-count rows and totals."""
    p = counts / sizes[:, None]
    return 1.0 - (p * p).sum(axis=1)


def best_split(
    x: np.ndarray,
    y: np.ndarray | None,
    s: np.ndarray | None,
    weights: CriterionWeights,
    min_leaf_samples: int = 1,
    n_groups: int | None = None,
    rec_features: np.ndarray | None = None,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) over all midpoint candidates, or None.

    Candidates are midpoints between consecutive distinct sorted values of
    each feature whose children both hold at least ``min_leaf_samples`` rows.
    The winner minimizes the size-weighted child criterion; ties break to the
    lowest feature index, then the lowest threshold. Returns None unless the
    winner improves the parent criterion by more than ``GAIN_EPS``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, d = x.shape
    if n < 2 * min_leaf_samples:
        return None
    w = weights
    parent = leaf_criterion(x, y, s, w, n_groups, rec_features)

    if w.lambda_f > 0 and n_groups is None:
        n_groups = int(np.asarray(s).max()) + 1
    rec = None
    row_sq = None
    if w.lambda_r > 0:
        rec = x if rec_features is None else np.asarray(rec_features, dtype=np.float64)
        if w.rec_mode is RecMode.MEAN_SQUARED:
            row_sq = (rec * rec).sum(axis=1)
    y_arr = np.asarray(y) if y is not None else None
    s_arr = np.asarray(s) if s is not None else None

    best_score = np.inf
    best_feature = -1
    best_threshold = 0.0
    left_sizes_all = np.arange(1, n, dtype=np.float64)
    for f in range(d):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        legal = (
            (xs[1:] != xs[:-1])
            & (left_sizes_all >= min_leaf_samples)
            & (n - left_sizes_all >= min_leaf_samples)
        )
        if not legal.any():
            continue
        cut = np.flatnonzero(legal)  # boundary after position cut (left size cut+1)
        nl = left_sizes_all[cut]
        nr = n - nl
        total = np.zeros(len(cut))
        if w.lambda_y > 0:
            ones_l = np.cumsum(y_arr[order])[cut].astype(np.float64)
            ones_r = float(y_arr.sum()) - ones_l
            counts_l = np.column_stack([nl - ones_l, ones_l])
            counts_r = np.column_stack([nr - ones_r, ones_r])
            total += w.lambda_y * (
                nl * _gini_terms(counts_l, nl) + nr * _gini_terms(counts_r, nr)
            )
        if w.lambda_f > 0:
            onehot = np.zeros((n, n_groups))
            onehot[np.arange(n), s_arr[order]] = 1.0
            cum = np.cumsum(onehot, axis=0)
            counts_l = cum[cut]
            counts_r = cum[-1] - counts_l
            c_s = 1.0 - 1.0 / n_groups
            total += w.lambda_f * (
                nl * (c_s - _gini_terms(counts_l, nl))
                + nr * (c_s - _gini_terms(counts_r, nr))
            )
        if w.lambda_r > 0:
            ro = rec[order]
            if w.rec_mode is RecMode.MEAN_SQUARED:
                cvec = np.cumsum(ro, axis=0)
                csq = np.cumsum(row_sq[order])
                sum_l = cvec[cut]
                sse_l = csq[cut] - (sum_l * sum_l).sum(axis=1) / nl
                sum_r = cvec[-1] - sum_l
                sse_r = (csq[-1] - csq[cut]) - (sum_r * sum_r).sum(axis=1) / nr
                total += w.lambda_r * (np.maximum(sse_l, 0.0) + np.maximum(sse_r, 0.0))
            else:
                l1_pre = np.zeros(n)
                l1_suf = np.zeros(n)
                for q in range(ro.shape[1]):
                    l1_pre += _prefix_abs_dev(ro[:, q])
                    l1_suf += _prefix_abs_dev(ro[::-1, q])
                total += w.lambda_r * (l1_pre[cut] + l1_suf[n - 2 - cut])
        scores = total / n
        j = int(np.argmin(scores))  # first minimum: lowest threshold wins ties
        if scores[j] < best_score:
            best_score = float(scores[j])
            best_feature = f
            pos = cut[j]
            best_threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
    gain = parent - best_score
    if best_feature < 0 or gain <= GAIN_EPS:
        return None
    return best_feature, best_threshold, float(gain)


@dataclass(frozen=True)
class FareTree:
    """A trained restricted encoder.

    ``leaf_rows`` holds the training-row index sets per leaf; after loading
    from JSON it is None (the medians suffice to encode new data).
    """

    nodes: tuple[TreeNode, ...]
    leaf_medians: np.ndarray
    leaf_counts: np.ndarray
    params: FareParams
    n_features: int
    leaf_rows: tuple[np.ndarray, ...] | None = None
    growth_totals: tuple[float, ...] = ()

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_counts)

    def assign(self, x: np.ndarray) -> np.ndarray:
        """Leaf index for every row of ``x``."""
        x = as_float_matrix(x, "X")
        if x.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"tree built on {self.n_features} features, got {x.shape[1]}"
            )
        out = np.empty(len(x), dtype=np.int64)
        stack = [(0, np.arange(len(x)))]
        while stack:
            node_id, rows = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node.leaf
                continue
            go_left = x[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def encode_matrix(self, x: np.ndarray) -> np.ndarray:
        """Representation (leaf median) for every row of ``x``."""
        return self.leaf_medians[self.assign(x)]

    def to_json(self) -> str:
        payload = {
            "format_version": TREE_FORMAT_VERSION,
            "n_features": self.n_features,
            "params": self.params.to_dict(),
            "nodes": [
                [n.feature, n.threshold, n.left, n.right, n.leaf] for n in self.nodes
            ],
            "leaves": [
                {"median": list(map(float, med)), "count": int(cnt)}
                for med, cnt in zip(self.leaf_medians, self.leaf_counts)
            ],
            "growth_totals": list(self.growth_totals),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "FareTree":
        payload = json.loads(text)
        version = payload.get("format_version")
        if version != TREE_FORMAT_VERSION:
            raise ValueError(f"unsupported tree format version {version!r}")
        nodes = tuple(
            TreeNode(feature=f, threshold=t, left=l, right=r, leaf=leaf)
            for f, t, l, r, leaf in payload["nodes"]
        )
        medians = np.array([leaf["median"] for leaf in payload["leaves"]], dtype=np.float64)
        counts = np.array([leaf["count"] for leaf in payload["leaves"]], dtype=np.int64)
        return cls(
            nodes=nodes,
            leaf_medians=medians,
            leaf_counts=counts,
            params=FareParams.from_dict(payload["params"]),
            n_features=payload["n_features"],
            growth_totals=tuple(payload.get("growth_totals", ())),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "FareTree":
        return cls.from_json(Path(path).read_text())


def encode(tree: FareTree, x) -> np.ndarray:
    """Representation of a single feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if len(x) != tree.n_features:
        raise DimensionMismatchError(
            f"tree built on {tree.n_features} features, got {len(x)}"
        )
    node = tree.nodes[0]
    while not node.is_leaf:
        node = tree.nodes[node.left if x[node.feature] <= node.threshold else node.right]
    return tree.leaf_medians[node.leaf].copy()


@dataclass(eq=False)
class _GrowLeaf:
    rows: np.ndarray  # indices into the growth arrays
    criterion: float
    best: tuple[int, float, float] | None
    node_id: int
    order: int


def _build_arrays(
    x: np.ndarray,
    y: np.ndarray | None,
    s: np.ndarray,
    n_groups: int,
    params: FareParams,
) -> FareTree:
    n = x.shape[0]
    w = params.weights
    rng = np.random.default_rng(params.seed)
    n_val = int(round(params.val_fraction * n))
    perm = rng.permutation(n)
    grow_idx = np.sort(perm[n_val:])
    if len(grow_idx) < params.min_leaf_samples:
        raise ValueError(
            f"{len(grow_idx)} growth rows after holdout, need >= min_leaf_samples"
        )
    xg = x[grow_idx]
    sg = s[grow_idx]
    yg = y[grow_idx] if y is not None else None
    rec_g = None
    if w.lambda_r > 0:
        # z-scored view so the reconstruction weight is scale-free
        rec_g = normalize_matrix(xg, fit_normalize(xg))

    def crit(rows: np.ndarray) -> float:
        return leaf_criterion(
            xg[rows],
            yg[rows] if yg is not None else None,
            sg[rows],
            w,
            n_groups,
            rec_g[rows] if rec_g is not None else None,
        )

    def search(rows: np.ndarray):
        return best_split(
            xg[rows],
            yg[rows] if yg is not None else None,
            sg[rows],
            w,
            params.min_leaf_samples,
            n_groups,
            rec_g[rows] if rec_g is not None else None,
        )

    root_rows = np.arange(len(grow_idx))
    root = _GrowLeaf(
        rows=root_rows, criterion=crit(root_rows), best=search(root_rows),
        node_id=0, order=0,
    )
    nodes: list = [root]  # leaf slots hold _GrowLeaf until finalized
    leaves: list[_GrowLeaf] = [root]
    next_order = 1
    total = len(root_rows) * root.criterion
    growth_totals = [total]
    while len(leaves) < params.max_leaves:
        splittable = [lf for lf in leaves if lf.best is not None]
        if not splittable:
            break
        # largest per-row gain; earlier leaf wins exact ties
        chosen = max(splittable, key=lambda lf: (lf.best[2], -lf.order))
        f, thr, _gain = chosen.best
        go_left = xg[chosen.rows, f] <= thr
        left_rows = chosen.rows[go_left]
        right_rows = chosen.rows[~go_left]
        children = []
        for rows in (left_rows, right_rows):
            child = _GrowLeaf(
                rows=rows, criterion=crit(rows), best=search(rows),
                node_id=len(nodes), order=next_order,
            )
            next_order += 1
            nodes.append(child)
            children.append(child)
        nodes[chosen.node_id] = TreeNode(
            feature=f, threshold=thr,
            left=children[0].node_id, right=children[1].node_id,
        )
        leaves.remove(chosen)
        leaves.extend(children)
        total += (
            len(left_rows) * children[0].criterion
            + len(right_rows) * children[1].criterion
            - len(chosen.rows) * chosen.criterion
        )
        growth_totals.append(total)

    # freeze leaf numbering and replace grow-leaf slots with leaf nodes
    final_nodes = list(nodes)
    for leaf_id, lf in enumerate(leaves):
        final_nodes[lf.node_id] = TreeNode(leaf=leaf_id)
    tree_nodes = tuple(final_nodes)

    # route every training row (growth and holdout) to its leaf
    skeleton = FareTree(
        nodes=tree_nodes,
        leaf_medians=np.zeros((len(leaves), x.shape[1])),
        leaf_counts=np.zeros(len(leaves), dtype=np.int64),
        params=params,
        n_features=x.shape[1],
    )
    assignment = skeleton.assign(x)
    leaf_rows = tuple(
        np.flatnonzero(assignment == leaf_id) for leaf_id in range(len(leaves))
    )
    medians = np.vstack([lower_median(x[rows], axis=0) for rows in leaf_rows])
    counts = np.array([len(rows) for rows in leaf_rows], dtype=np.int64)
    return FareTree(
        nodes=tree_nodes,
        leaf_medians=medians,
        leaf_counts=counts,
        params=params,
        n_features=x.shape[1],
        leaf_rows=leaf_rows,
        growth_totals=tuple(growth_totals),
    )


def build_tree(train: Dataset, task: str | None, params: FareParams) -> FareTree:
    """Grow a tree encoder on a training dataset.

    ``task`` names the label column supplying the utility signal; it is
    required exactly when ``weights.lambda_y > 0``. A ``val_fraction`` of the
    rows (seeded) is held out from splitting decisions; leaf medians are
    computed over all training rows either way.
    """
    y = None
    if params.weights.lambda_y > 0:
        if task is None:
            raise UnknownTaskError("weights.lambda_y > 0 requires a task name")
        if task not in train.tasks:
            raise UnknownTaskError(
                f"task {task!r} not in dataset (has {sorted(train.tasks)})"
            )
        y = train.tasks[task]
    elif task is not None and task not in train.tasks:
        raise UnknownTaskError(
            f"task {task!r} not in dataset (has {sorted(train.tasks)})"
        )
    return _build_arrays(
        train.features, y, train.sensitive, train.n_groups, params
    )


class FareEncoder(BaseEstimator, TransformerMixin):
    """Scikit-learn style wrapper around :func:`build_tree`.

    Parameters mirror :class:`FareParams`; ``fit`` requires the sensitive
    group vector and, when ``lambda_y > 0``, binary task labels ``y``.
    """

    def __init__(
        self,
        max_leaves: int = 32,
        min_leaf_samples: int = 1,
        lambda_y: float = 1.0,
        lambda_f: float = 0.0,
        lambda_r: float = 0.0,
        rec_mode: str = "none",
        val_fraction: float = 0.0,
        random_state: int = 0,
    ):
        self.max_leaves = max_leaves
        self.min_leaf_samples = min_leaf_samples
        self.lambda_y = lambda_y
        self.lambda_f = lambda_f
        self.lambda_r = lambda_r
        self.rec_mode = rec_mode
        self.val_fraction = val_fraction
        self.random_state = random_state

    def _params(self) -> FareParams:
        return FareParams(
            weights=CriterionWeights(
                lambda_y=self.lambda_y,
                lambda_f=self.lambda_f,
                lambda_r=self.lambda_r,
                rec_mode=self.rec_mode,
            ),
            max_leaves=self.max_leaves,
            min_leaf_samples=self.min_leaf_samples,
            val_fraction=self.val_fraction,
            seed=self.random_state,
        )

    def fit(self, X, y=None, sensitive=None):
        params = self._params()
        X = as_float_matrix(X, "X")
        if sensitive is None:
            raise ValueError("fit requires the sensitive group vector")
        s = as_group_vector(sensitive)
        if len(s) != len(X):
            raise ValueError("sensitive length does not match X")
        labels = None
        if params.weights.lambda_y > 0:
            if y is None:
                raise ValueError("lambda_y > 0 requires task labels y")
            labels = as_binary_vector(y)
            if len(labels) != len(X):
                raise ValueError("y length does not match X")
        self.tree_ = _build_arrays(X, labels, s, int(s.max()) + 1, params)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "tree_"):
            raise ValueError("FareEncoder is not fitted")
        return self.tree_.encode_matrix(as_float_matrix(X, "X"))
