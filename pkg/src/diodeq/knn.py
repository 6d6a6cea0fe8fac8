"""K-nearest-neighbour regression with Minkowski distances.

Neighbour ties are broken by training-row index in both search strategies,
so brute force and the kd-tree always return the same neighbour sets.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError, NotFittedError


def minkowski_distance(x, y, p: float = 2.0) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch {x.size} vs {y.size}")
    if not p >= 1:
        raise InputError(f"Minkowski exponent must be >= 1, got {p}")
    d = np.abs(x - y)
    if math.isinf(p):
        return float(d.max()) if d.size else 0.0
    if p == 1.0:
        return float(d.sum())
    if p == 2.0:
        return float(math.sqrt((d * d).sum()))
    return float(np.power(np.power(d, p).sum(), 1.0 / p))


@dataclass(frozen=True)
class KnnConfig:
    k: int = 4
    p: float = 4.0
    weighting: str = "inverse-distance"
    search: str = "brute"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InputError(f"k must be a positive integer, got {self.k}")
        if not self.p >= 1:
            raise InputError(f"p must be >= 1, got {self.p}")
        if self.weighting not in ("uniform", "inverse-distance"):
            raise InputError(f"unknown weighting {self.weighting!r}")
        if self.search not in ("brute", "kd-tree"):
            raise InputError(f"unknown search {self.search!r}")

    def to_json(self):
        return {"k": self.k, "p": "inf" if math.isinf(self.p) else self.p,
                "weighting": self.weighting, "search": self.search}

    @classmethod
    def from_json(cls, obj):
        p = obj.get("p", 2.0)
        return cls(k=int(obj.get("k", 4)), p=math.inf if p in ("inf", "Infinity") else float(p),
                   weighting=obj.get("weighting", "inverse-distance"),
                   search=obj.get("search", "brute"))


class _KDNode:
    __slots__ = ("axis", "split", "left", "right", "idx")

    def __init__(self, axis=-1, split=0.0, left=None, right=None, idx=None):
        self.axis, self.split, self.left, self.right, self.idx = axis, split, left, right, idx


class KDTree:
    """Exact kd-tree for Minkowski metrics (any p >= 1).

    Pruning uses the per-axis lower bound |q_a - split| <= d_p, valid for all
    p. Candidates at exactly the current k-th distance are still visited so
    index tie-breaking matches brute force.
    """

    def __init__(self, X, leaf_size: int = 16):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.leaf_size = leaf_size
        self.root = self._build(np.arange(len(self.X)), 0)

    def _build(self, idx, depth):
        if len(idx) <= self.leaf_size:
            return _KDNode(idx=idx)
        pts = self.X[idx]
        axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
        order = idx[np.argsort(pts[:, axis], kind="stable")]
        mid = len(order) // 2
        split = float(self.X[order[mid], axis])
        left = order[self.X[order, axis] < split]
        right = order[self.X[order, axis] >= split]
        if len(left) == 0 or len(right) == 0:
            return _KDNode(idx=idx)
        return _KDNode(axis, split, self._build(left, depth + 1), self._build(right, depth + 1))

    def query(self, q, k, p):
        q = np.asarray(q, dtype=np.float64)
        heap: list[tuple[float, int]] = []  # max-heap of (-dist, -idx)

        def worst():
            return (-heap[0][0], -heap[0][1])

        def visit(node):
            if node.idx is not None:
                d = _kernels.python_kernels._distances(self.X[node.idx], q[None, :], p)[0]
                for dist, j in zip(d, node.idx):
                    item = (-float(dist), -int(j))
                    if len(heap) < k:
                        heapq.heappush(heap, item)
                    elif (dist, j) < worst():
                        heapq.heapreplace(heap, item)
                return
            diff = q[node.axis] - node.split
            near, far = (node.left, node.right) if diff < 0 else (node.right, node.left)
            visit(near)
            if len(heap) < k or abs(diff) <= worst()[0]:
                visit(far)

        visit(self.root)
        out = sorted((-d, -i) for d, i in heap)
        return np.array([i for _, i in out], dtype=np.int64), np.array([d for d, _ in out])


class KnnRegressor:
    """Lazy regressor: stores (pre-scaled) training data and averages neighbours."""

    def __init__(self, config: KnnConfig | None = None, **kwargs):
        self.config = config if config is not None else KnnConfig(**kwargs)
        self.X_: np.ndarray | None = None
        self.y_: np.ndarray | None = None
        self._tree: KDTree | None = None
        self.fitted = False

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) != len(y):
            raise DimensionError("features and targets differ in length")
        if len(X) == 0:
            raise InputError("empty training set")
        if self.config.k > len(X):
            raise InputError(f"k={self.config.k} exceeds training size {len(X)}")
        self.X_ = X.copy()
        self.y_ = y.copy()
        self.X_.setflags(write=False)
        self.y_.setflags(write=False)
        self._tree = KDTree(self.X_) if self.config.search == "kd-tree" else None
        self.fitted = True
        return self

    @property
    def n_train(self) -> int:
        return 0 if self.X_ is None else len(self.X_)

    def kneighbors(self, Q) -> tuple[np.ndarray, np.ndarray]:
        if not self.fitted:
            raise NotFittedError("KnnRegressor used before fit")
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        if Q.shape[1] != self.X_.shape[1]:
            raise DimensionError(f"query has {Q.shape[1]} features, model expects {self.X_.shape[1]}")
        k, p = self.config.k, float(self.config.p)
        if self._tree is None:
            return _kernels.knn_search(self.X_, Q, k, p)
        idx = np.empty((len(Q), k), dtype=np.int64)
        dist = np.empty((len(Q), k))
        for r, q in enumerate(Q):
            idx[r], dist[r] = self._tree.query(q, k, p)
        return idx, dist

    def predict(self, Q) -> np.ndarray:
        idx, dist = self.kneighbors(Q)
        targets = self.y_[idx]
        if self.config.weighting == "uniform":
            return targets.mean(axis=1)
        out = np.empty(len(idx))
        for r in range(len(idx)):
            zero = dist[r] == 0.0
            if zero.any():
                out[r] = targets[r][zero].mean()
            else:
                # shifted form stays exact when all neighbour targets agree
                w = 1.0 / dist[r]
                t0 = targets[r][0]
                out[r] = float(t0 + np.dot(w, targets[r] - t0) / w.sum())
        return out

    def to_json(self) -> dict:
        if not self.fitted:
            raise NotFittedError("cannot serialise an unfitted model")
        return {"kind": "knn", "config": self.config.to_json(),
                "X": self.X_.tolist(), "y": self.y_.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "KnnRegressor":
        return cls(KnnConfig.from_json(obj["config"])).fit(np.array(obj["X"]), np.array(obj["y"]))
