"""Scalar statistics for group fairness evaluation on binary tasks.

All functions are pure and operate on plain arrays, so they are safe to call
from parallel workers.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyGroupError
from .validation import as_binary_vector, as_group_vector, check_same_length


def dp_distance(preds, groups, n_groups: int | None = None) -> float:
    """Demographic parity distance of hard predictions.

    The maximum over group pairs of the absolute difference in positive
    prediction rates. For two groups this is simply the gap between the two
    rates. ``preds`` must be hard 0/1 decisions, not scores.

    Parameters
    ----------
    preds : array of 0/1 predictions.
    groups : array of sensitive group ids, same length.
    n_groups : declared number of groups. Defaults to ``max(groups) + 1``.
        Every declared group must have at least one row.
    """
    p = as_binary_vector(preds, "preds")
    g = as_group_vector(groups, "groups")
    n = check_same_length(("preds", p), ("groups", g))
    if n == 0:
        raise ValueError("dp_distance requires at least one row")
    k = int(g.max()) + 1 if n_groups is None else int(n_groups)
    counts = np.bincount(g, minlength=k)
    if len(counts) > k:
        raise EmptyGroupError(
            f"group id {int(g.max())} out of declared range 0..{k - 1}"
        )
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise EmptyGroupError(f"group {missing} has zero rows")
    rates = np.bincount(g, weights=p, minlength=k) / counts
    # max pairwise |rate_i - rate_j| reduces to max - min
    return float(rates.max() - rates.min())


def smc(a, b) -> float:
    """Simple matching coefficient between two binary labelings.

    Fraction of positions where the vectors agree: 1.0 for identical
    labelings, about 0.5 for independent ones.
    """
    av = as_binary_vector(a, "a")
    bv = as_binary_vector(b, "b")
    n = check_same_length(("a", av), ("b", bv))
    if n == 0:
        raise ValueError("smc requires nonempty vectors")
    return float(np.mean(av == bv))


def gini(labels) -> float:
    """Gini impurity of a categorical vector: 1 - sum of squared proportions."""
    arr = np.asarray(labels)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("gini requires a nonempty 1-D vector")
    _, counts = np.unique(arr, return_counts=True)
    p = counts / len(arr)
    return float(1.0 - np.dot(p, p))


def accuracy(preds, labels) -> float:
    """Fraction of matching positions."""
    p = as_binary_vector(preds, "preds")
    y = as_binary_vector(labels, "labels")
    n = check_same_length(("preds", p), ("labels", y))
    if n == 0:
        raise ValueError("accuracy requires nonempty vectors")
    return float(np.mean(p == y))


def majority_accuracy(train_labels, test_labels) -> float:
    """Accuracy on the test set of a constant predictor of the train majority.

    Ties between classes are broken toward the lower label.
    """
    tr = as_binary_vector(train_labels, "train_labels")
    te = as_binary_vector(test_labels, "test_labels")
    if len(tr) == 0 or len(te) == 0:
        raise ValueError("majority_accuracy requires nonempty vectors")
    majority = int(np.bincount(tr, minlength=2).argmax())
    return float(np.mean(te == majority))
