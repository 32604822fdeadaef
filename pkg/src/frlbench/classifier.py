"""Downstream binary classifier: one hidden ReLU layer, sigmoid output,
binary cross-entropy, mini-batch Adam.

Implemented directly on numpy so runs are bit-reproducible from the seed:
weights initialize from a symmetric uniform scaled by fan-in, batches are
reshuffled each epoch from the same generator, and prediction thresholds at
0.5. Everything is configurable through :class:`ClassifierParams`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import as_binary_vector, as_float_matrix

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ClassifierParams:
    """Training configuration for the downstream classifier."""

    hidden_size: int = 50
    epochs: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def with_seed(self, seed: int) -> "ClassifierParams":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """Single-hidden-layer network with deterministic Adam training."""

    def __init__(
        self,
        hidden_size: int = 50,
        epochs: int = 50,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        random_state: int = 0,
    ):
        self.hidden_size = hidden_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = as_binary_vector(y, "y")
        if len(y) != len(X):
            raise ValueError("X and y lengths differ")
        n, d = X.shape
        h = int(self.hidden_size)
        rng = np.random.default_rng(self.random_state)
        # symmetric uniform scaled by fan-in
        b1 = 1.0 / np.sqrt(max(d, 1))
        b2 = 1.0 / np.sqrt(h)
        w1 = rng.uniform(-b1, b1, size=(d, h))
        bias1 = rng.uniform(-b1, b1, size=h)
        w2 = rng.uniform(-b2, b2, size=(h, 1))
        bias2 = rng.uniform(-b2, b2, size=1)
        params = [w1, bias1, w2, bias2]
        m_t = [np.zeros_like(p) for p in params]
        v_t = [np.zeros_like(p) for p in params]
        yf = y.astype(np.float64)
        step = 0
        lr = float(self.learning_rate)
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, int(self.batch_size)):
                batch = order[start:start + int(self.batch_size)]
                xb = X[batch]
                yb = yf[batch]
                z1 = xb @ params[0] + params[1]
                a1 = np.maximum(z1, 0.0)
                z2 = (a1 @ params[2]).ravel() + params[3]
                p = _sigmoid(z2)
                # d(BCE)/dz2 = p - y, averaged over the batch
                dz2 = (p - yb) / len(batch)
                grads = [None] * 4
                grads[2] = a1.T @ dz2[:, None]
                grads[3] = np.array([dz2.sum()])
                da1 = dz2[:, None] @ params[2].T
                dz1 = da1 * (z1 > 0)
                grads[0] = xb.T @ dz1
                grads[1] = dz1.sum(axis=0)
                step += 1
                c1 = 1.0 - ADAM_BETA1 ** step
                c2 = 1.0 - ADAM_BETA2 ** step
                for i in range(4):
                    m_t[i] = ADAM_BETA1 * m_t[i] + (1 - ADAM_BETA1) * grads[i]
                    v_t[i] = ADAM_BETA2 * v_t[i] + (1 - ADAM_BETA2) * grads[i] ** 2
                    params[i] = params[i] - lr * (m_t[i] / c1) / (
                        np.sqrt(v_t[i] / c2) + ADAM_EPS
                    )
        self.w1_, self.b1_, self.w2_, self.b2_ = params
        self.n_features_in_ = d
        self.classes_ = np.array([0, 1])
        return self

    def decision_scores(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"trained on {self.n_features_in_} features, got {X.shape[1]}"
            )
        a1 = np.maximum(X @ self.w1_ + self.b1_, 0.0)
        return (a1 @ self.w2_).ravel() + self.b2_

    def predict_proba(self, X) -> np.ndarray:
        p = _sigmoid(self.decision_scores(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (_sigmoid(self.decision_scores(X)) >= 0.5).astype(np.int64)


def train_classifier(reps_train, labels_train, params: ClassifierParams) -> MlpClassifier:
    """Train the downstream classifier on (already normalized) representations."""
    clf = MlpClassifier(
        hidden_size=params.hidden_size,
        epochs=params.epochs,
        batch_size=params.batch_size,
        learning_rate=params.learning_rate,
        random_state=params.seed,
    )
    return clf.fit(reps_train, labels_train)
