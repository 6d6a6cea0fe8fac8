"""First-order gradient boosting of regression trees on squared loss."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DimensionError, InputError, NotFittedError


@dataclass
class TreeNode:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_json(self):
        if self.is_leaf:
            return {"value": self.value}
        return {"feature": self.feature, "threshold": self.threshold, "value": self.value,
                "left": self.left.to_json(), "right": self.right.to_json()}

    @classmethod
    def from_json(cls, obj):
        if "feature" not in obj:
            return cls(value=obj["value"])
        return cls(obj["value"], obj["feature"], obj["threshold"],
                   cls.from_json(obj["left"]), cls.from_json(obj["right"]))


class RegressionTree:
    """CART regression tree grown greedily by exact variance-reduction splits."""

    def __init__(self, max_depth: int | None = 3, min_samples_leaf: int = 1):
        if max_depth is not None and max_depth < 0:
            raise InputError("max_depth must be >= 0")
        if min_samples_leaf < 1:
            raise InputError("min_samples_leaf must be >= 1")
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.root: TreeNode | None = None

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        self.root = self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth):
        node = TreeNode(value=float(np.mean(y)))
        if (self.max_depth is not None and depth >= self.max_depth) \
                or len(y) < 2 * self.min_samples_leaf or np.ptp(y) == 0.0:
            return node
        order = np.argsort(X, axis=0, kind="stable")
        f, thr, gain = _kernels.best_split(X, y, order, self.min_samples_leaf)
        if f < 0 or not gain > 0:
            return node
        mask = X[:, f] <= thr
        node.feature, node.threshold = int(f), float(thr)
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def predict(self, X):
        if self.root is None:
            raise NotFittedError("tree not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(len(X))
        self._fill(self.root, X, np.arange(len(X)), out)
        return out

    def _fill(self, node, X, idx, out):
        if node.is_leaf:
            out[idx] = node.value
            return
        mask = X[idx, node.feature] <= node.threshold
        self._fill(node.left, X, idx[mask], out)
        self._fill(node.right, X, idx[~mask], out)

    def depth(self, node=None) -> int:
        node = self.root if node is None else node
        if node is None or node.is_leaf:
            return 0
        return 1 + max(self.depth(node.left), self.depth(node.right))


@dataclass
class GbtModel:
    base: float
    trees: list[RegressionTree] = field(default_factory=list)
    eta: float = 0.1
    rounds: int = 100
    max_depth: int | None = 3
    min_samples_leaf: int = 1
    n_features: int = 0

    def to_json(self):
        return {"base": self.base, "eta": self.eta, "rounds": self.rounds,
                "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
                "n_features": self.n_features, "trees": [t.root.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, obj):
        trees = []
        for t in obj["trees"]:
            tree = RegressionTree(obj["max_depth"], obj["min_samples_leaf"])
            tree.root = TreeNode.from_json(t)
            trees.append(tree)
        return cls(obj["base"], trees, obj["eta"], obj["rounds"], obj["max_depth"],
                   obj["min_samples_leaf"], obj.get("n_features", 0))


def gbt_train(X, y, rounds: int = 100, eta: float = 0.1, max_depth: int | None = 3,
              min_samples_leaf: int = 1, history: list | None = None) -> GbtModel:
    """Fit ``rounds`` trees, each to the residuals of the current ensemble.

    If ``history`` is a list, the training MSE after every round is appended.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(X) != len(y):
        raise DimensionError("features and targets differ in length")
    if not 0 < eta <= 1:
        raise InputError("eta must lie in (0, 1]")
    if rounds < 0:
        raise InputError("rounds must be non-negative")
    if len(y) < max(2 * min_samples_leaf, 1):
        raise InputError(f"need at least {2 * min_samples_leaf} rows for min_samples_leaf={min_samples_leaf}")
    model = GbtModel(float(np.mean(y)), [], eta, rounds, max_depth, min_samples_leaf, X.shape[1])
    F = np.full(len(y), model.base)
    if np.ptp(y) == 0.0:
        model.base = float(y[0])
        return model
    for _ in range(rounds):
        resid = y - F
        if not np.any(resid):
            break
        tree = RegressionTree(max_depth, min_samples_leaf).fit(X, resid)
        if tree.root.is_leaf and tree.root.value == 0.0:
            break
        model.trees.append(tree)
        F = F + eta * tree.predict(X)
        if history is not None:
            history.append(float(np.mean((y - F) ** 2)))
    return model


def gbt_predict(model: GbtModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.n_features and X.shape[1] != model.n_features:
        raise DimensionError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = np.full(len(X), model.base)
    for tree in model.trees:
        out += model.eta * tree.predict(X)
    return out


class GbtRegressor:
    def __init__(self, rounds: int = 50, eta: float = 0.1, max_depth: int | None = 3,
                 min_samples_leaf: int = 1):
        self.params = dict(rounds=rounds, eta=eta, max_depth=max_depth,
                           min_samples_leaf=min_samples_leaf)
        self.model: GbtModel | None = None
        self.fitted = False

    def fit(self, X, y):
        self.model = gbt_train(X, y, **self.params)
        self.fitted = True
        return self

    def predict(self, X):
        if not self.fitted:
            raise NotFittedError("GbtRegressor used before fit")
        return gbt_predict(self.model, X)
