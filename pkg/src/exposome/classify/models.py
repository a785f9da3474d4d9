"""From-scratch classifiers: softmax regression, Gaussian naive Bayes, CART and random forest."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, EmptyDataset, SingleClass

MODEL_KINDS = ("logistic_regression", "gaussian_nb", "decision_tree", "random_forest")

# name -> {param: (default, lower, upper)}
HYPERPARAMETERS = {
    "logistic_regression": {"iterations": (500, 1, 1_000_000), "learning_rate": (0.1, 1e-12, 1e3)},
    "gaussian_nb": {"var_floor": (1e-9, 0.0, 1.0)},
    "decision_tree": {"max_depth": (12, 1, 1000), "min_samples_split": (2, 2, 1_000_000)},
    "random_forest": {"n_trees": (100, 1, 100_000), "max_depth": (12, 1, 1000),
                      "min_samples_split": (2, 2, 1_000_000)},
}


@dataclass(frozen=True)
class ModelKind:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.name!r}; expected one of {MODEL_KINDS}")
        spec = HYPERPARAMETERS[self.name]
        for key, value in self.params.items():
            if key not in spec:
                raise ValueError(f"{self.name} has no hyperparameter {key!r}")
            _, lo, hi = spec[key]
            if not (lo <= value <= hi):
                raise ValueError(f"{self.name}.{key}={value} outside [{lo}, {hi}]")

    def resolved(self) -> dict:
        return {k: self.params.get(k, d) for k, (d, _, _) in HYPERPARAMETERS[self.name].items()}

    def build(self, seed: int = 0):
        p = self.resolved()
        if self.name == "logistic_regression":
            return LogisticRegression(**p)
        if self.name == "gaussian_nb":
            return GaussianNB(**p)
        if self.name == "decision_tree":
            return DecisionTree(**p)
        return RandomForest(**p, seed=seed)

    def __str__(self) -> str:
        return self.name


def _check_fit_input(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    classes, yi = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise SingleClass(f"only class {classes[0]} present")
    return X, classes, yi.ravel()


class _Classifier:
    classes_: np.ndarray
    n_features_: int

    def _check_predict_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"model expects {self.n_features_} features, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        return self.classes_[self._predict_index(self._check_predict_input(X))]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray):
    """Mean cross-entropy of softmax(XW + b) against one-hot ``Y`` and its gradient."""
    n = X.shape[0]
    P = _softmax(X @ W + b)
    loss = -float(np.sum(Y * np.log(np.clip(P, 1e-300, None)))) / n
    G = (P - Y) / n
    return loss, X.T @ G, G.sum(axis=0)


class LogisticRegression(_Classifier):
    """Multinomial logistic regression by full-batch gradient descent.

    Features are z-scored with training statistics before fitting.
    """

    def __init__(self, iterations: int = 500, learning_rate: float = 0.1):
        self.iterations = int(iterations)
        self.learning_rate = learning_rate

    def fit(self, X, y):
        X, self.classes_, yi = _check_fit_input(X, y)
        self.n_features_ = X.shape[1]
        self.mu_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd_ = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mu_) / self.sd_
        Y = np.eye(self.classes_.size)[yi]
        W = np.zeros((Z.shape[1], self.classes_.size))
        b = np.zeros(self.classes_.size)
        for _ in range(self.iterations):
            _, gW, gb = softmax_loss_grad(W, b, Z, Y)
            W -= self.learning_rate * gW
            b -= self.learning_rate * gb
        self.W_, self.b_ = W, b
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        return _softmax(((X - self.mu_) / self.sd_) @ self.W_ + self.b_)

    def _predict_index(self, X):
        return np.argmax(_softmax(((X - self.mu_) / self.sd_) @ self.W_ + self.b_), axis=1)


class GaussianNB(_Classifier):
    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, X, y):
        X, self.classes_, yi = _check_fit_input(X, y)
        self.n_features_ = X.shape[1]
        C = self.classes_.size
        self.theta_ = np.array([X[yi == c].mean(axis=0) for c in range(C)])
        var = np.array([X[yi == c].var(axis=0) for c in range(C)])
        self.var_ = np.maximum(var, self.var_floor)
        self.log_prior_ = np.log(np.bincount(yi, minlength=C) / yi.size)
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_), axis=1)[None, :]
        ll = ll - 0.5 * np.sum((X[:, None, :] - self.theta_[None]) ** 2 / self.var_[None], axis=2)
        return ll + self.log_prior_

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def _predict_index(self, X):
        return np.argmax(self.joint_log_likelihood(X), axis=1)


def _best_split(X: np.ndarray, yi: np.ndarray, n_classes: int, features):
    """Lowest weighted-Gini threshold split over ``features``; None if no split exists.

    Ties go to the earlier feature in ``features``, then the lower threshold.
    """
    feats = np.asarray(list(features), dtype=np.int64)
    n = yi.size
    V = X[:, feats]
    order = np.argsort(V, axis=0, kind="stable")
    Vs = np.take_along_axis(V, order, axis=0)
    onehot = (yi[order][..., None] == np.arange(n_classes)).astype(float)
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    gini = (nl - np.sum(left ** 2, axis=2) / nl) + (nr - np.sum(right ** 2, axis=2) / nr)
    valid = Vs[:-1] < Vs[1:]
    if not valid.any():
        return None
    gini = np.where(valid, gini, np.inf).T  # features x positions
    j, i = np.unravel_index(int(np.argmin(gini)), gini.shape)
    lo, hi = Vs[i, j], Vs[i + 1, j]
    thr = 0.5 * (lo + hi)
    if not thr < hi:
        thr = lo
    return gini[j, i] / n, int(feats[j]), float(thr)


class DecisionTree(_Classifier):
    """CART with Gini impurity, stored as flat node arrays.

    Nodes split while they are impure, shallower than ``max_depth`` and hold
    at least ``min_samples_split`` rows. With ``max_features`` set, each
    split considers that many randomly chosen features.
    """

    def __init__(self, max_depth: int = 12, min_samples_split: int = 2,
                 max_features: int | None = None, rng: np.random.Generator | None = None):
        self.max_depth = int(max_depth)
        self.min_samples_split = int(min_samples_split)
        self.max_features = max_features
        self.rng = rng

    def fit(self, X, y, classes=None):
        if classes is None:
            X, self.classes_, yi = _check_fit_input(X, y)
        else:
            # forest members share the forest's class list
            X = np.asarray(X, dtype=float)
            self.classes_ = classes
            yi = np.searchsorted(classes, y)
        self.n_features_ = X.shape[1]
        C = self.classes_.size
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(-1)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = np.bincount(yi[idx], minlength=C)
            value[node] = int(np.argmax(counts))
            if depth >= self.max_depth or idx.size < self.min_samples_split or counts.max() == idx.size:
                continue
            if self.max_features is None:
                feats = range(self.n_features_)
            else:
                feats = self.rng.choice(self.n_features_, size=self.max_features, replace=False)
            split = _best_split(X[idx], yi[idx], C, feats)
            if split is None:
                continue
            _, f, thr = split
            go_left = X[idx, f] <= thr
            feature[node], threshold[node] = int(f), float(thr)
            left[node], right[node] = new_node(), new_node()
            stack.append((right[node], idx[~go_left], depth + 1))
            stack.append((left[node], idx[go_left], depth + 1))
        self.feature_ = np.array(feature)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left)
        self.right_ = np.array(right)
        self.value_ = np.array(value)
        return self

    @property
    def n_nodes(self) -> int:
        return self.feature_.size

    def _predict_index(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature_[node]
            internal = f >= 0
            if not internal.any():
                return self.value_[node]
            go_left = X[rows, np.where(internal, f, 0)] <= self.threshold_[node]
            nxt = np.where(go_left, self.left_[node], self.right_[node])
            node = np.where(internal, nxt, node)


class RandomForest(_Classifier):
    """Bagged CART trees with sqrt(p) candidate features per split.

    Tree ``i`` draws its bootstrap sample and feature subsets from a
    generator seeded by ``(seed, i)``, so results do not depend on the order
    trees are built in. Votes are tallied per class; ties go to the lowest
    class.
    """

    def __init__(self, n_trees: int = 100, max_depth: int = 12, min_samples_split: int = 2,
                 seed: int = 0):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed

    def fit(self, X, y):
        X, self.classes_, yi = _check_fit_input(X, y)
        self.n_features_ = X.shape[1]
        m = max(1, int(math.sqrt(self.n_features_)))
        n = X.shape[0]
        self.trees_ = []
        for i in range(self.n_trees):
            rng = np.random.default_rng([self.seed, i])
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(self.max_depth, self.min_samples_split, m, rng)
            tree.fit(X[boot], yi[boot], classes=np.arange(self.classes_.size))
            self.trees_.append(tree)
        return self

    def votes(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        out = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            out[rows, tree._predict_index(X)] += 1
        return out

    def _predict_index(self, X):
        return np.argmax(self.votes(X), axis=1)


def train_model(kind: ModelKind | str, dataset, seed: int = 0):
    """Fit a fresh model of ``kind`` on a LabeledDataset."""
    if isinstance(kind, str):
        kind = ModelKind(kind)
    if len(dataset) == 0:
        raise EmptyDataset("dataset has no rows")
    return kind.build(seed).fit(dataset.X, dataset.y)


def predict(model, X) -> np.ndarray:
    return model.predict(X)
