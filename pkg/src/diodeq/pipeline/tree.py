"""Tree-encoded pipelines of scalers, stacking transformers, unions and estimators."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..dataset import apply_scaler, fit_scaler
from ..errors import DimensionError, InputError, NotFittedError
from ..knn import KnnConfig, KnnRegressor
from ..model_core import FitReport, cross_validate, mse
from .gbt import GbtRegressor

MAX_DEPTH = 3


# ------------------------------------------------------------ primitives


def stacking_augment(inner, X, y=None, fitted: bool = False) -> np.ndarray:
    """Append the inner regressor's prediction as a new last column.

    With ``fitted=False`` the inner model is first fit on ``(X, y)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not fitted:
        if y is None:
            raise InputError("stacking_augment needs targets to fit the inner regressor")
        inner.fit(X, y)
    return np.column_stack([X, inner.predict(X)])


def feature_union(left, right) -> np.ndarray:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.ndim == 1:
        left = left[:, None]
    if right.ndim == 1:
        right = right[:, None]
    if right.size == 0 and right.shape[0] in (0, left.shape[0]):
        return left.copy()
    if left.shape[0] != right.shape[0]:
        raise DimensionError(f"row mismatch {left.shape[0]} vs {right.shape[0]}")
    return np.hstack([left, right])


class ScalerTransformer:
    def __init__(self, kind: str = "iqr-robust"):
        self.kind = kind
        self.params = None

    def fit(self, X, y=None):
        self.params = fit_scaler(X, self.kind)
        return self

    def transform(self, X):
        if self.params is None:
            raise NotFittedError("scaler used before fit")
        return apply_scaler(self.params, X)


class StackingTransformer:
    def __init__(self, inner_factory: Callable[[], Any]):
        self.inner = inner_factory()
        self.fitted = False

    def fit(self, X, y):
        self.inner.fit(np.atleast_2d(X), y)
        self.fitted = True
        return self

    def transform(self, X):
        if not self.fitted:
            raise NotFittedError("stacking transformer used before fit")
        return stacking_augment(self.inner, X, fitted=True)


# -------------------------------------------------------------- registry


@dataclass(frozen=True)
class NodeSpec:
    role: str  # "input" | "transformer" | "estimator"
    arity: int
    build: Callable[[dict], Any] | None
    menu: dict = field(default_factory=dict)  # param name -> allowed values; first is default
    width: Callable[[list[int]], int] = lambda ws: ws[0] if ws else 0

    def default_params(self) -> dict:
        return {k: v[0] for k, v in self.menu.items()}


KNN_MENU = {"k": [4, 1, 2, 3, 5, 7], "p": [2.0, 1.0, 4.0], "weighting": ["inverse-distance", "uniform"]}
GBT_MENU = {"rounds": [30, 60], "eta": [0.3, 0.1], "max_depth": [3, 2, 4]}


def _knn(params):
    return KnnRegressor(KnnConfig(k=int(params.get("k", 4)), p=float(params.get("p", 2.0)),
                                  weighting=params.get("weighting", "inverse-distance")))


def _gbt(params):
    return GbtRegressor(rounds=int(params.get("rounds", 30)), eta=float(params.get("eta", 0.3)),
                        max_depth=params.get("max_depth", 3))


REGISTRY: dict[str, NodeSpec] = {
    "input": NodeSpec("input", 0, None),
    "iqr-scaler": NodeSpec("transformer", 1, lambda p: ScalerTransformer("iqr-robust")),
    "standard-scaler": NodeSpec("transformer", 1, lambda p: ScalerTransformer("standard")),
    "stacking-gbt": NodeSpec("transformer", 1, lambda p: StackingTransformer(lambda: _gbt(p)),
                             GBT_MENU, lambda ws: ws[0] + 1),
    "stacking-knn": NodeSpec("transformer", 1, lambda p: StackingTransformer(lambda: _knn(p)),
                             KNN_MENU, lambda ws: ws[0] + 1),
    "feature-union": NodeSpec("transformer", 2, None, {}, lambda ws: sum(ws)),
    "knn-regressor": NodeSpec("estimator", 1, _knn, KNN_MENU),
    "gbt-regressor": NodeSpec("estimator", 1, _gbt, GBT_MENU),
}


# -------------------------------------------------------------- tree type


@dataclass
class PipelineNode:
    kind: str
    params: dict = field(default_factory=dict)
    children: list["PipelineNode"] = field(default_factory=list)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.params:
            out["params"] = dict(self.params)
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineNode":
        return cls(obj["kind"], dict(obj.get("params", {})),
                   [cls.from_json(c) for c in obj.get("children", [])])

    def key(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def nodes(self):
        """Pre-order walk yielding ``(node, parent, child_index)``."""
        stack = [(self, None, -1)]
        while stack:
            node, parent, i = stack.pop()
            yield node, parent, i
            for j in range(len(node.children) - 1, -1, -1):
                stack.append((node.children[j], node, j))

    def kinds(self) -> set[str]:
        return {n.kind for n, _, _ in self.nodes()}

    def copy(self) -> "PipelineNode":
        return PipelineNode(self.kind, dict(self.params), [c.copy() for c in self.children])

    def __str__(self):
        if not self.children:
            return self.kind
        return f"{self.kind}({', '.join(str(c) for c in self.children)})"


def inp() -> PipelineNode:
    return PipelineNode("input")


def transformer_depth(node: PipelineNode) -> int:
    spec = REGISTRY[node.kind]
    if spec.role == "input":
        return 0
    inner = max(transformer_depth(c) for c in node.children)
    return inner if spec.role == "estimator" else 1 + inner


def output_width(node: PipelineNode, n_features: int) -> int:
    spec = REGISTRY[node.kind]
    if spec.role == "input":
        return n_features
    return spec.width([output_width(c, n_features) for c in node.children])


def validate_tree(root: PipelineNode, n_features: int = 2, max_depth: int = MAX_DEPTH,
                  registry: dict[str, NodeSpec] | None = None) -> None:
    """Raise InputError unless the tree is a well-typed pipeline."""
    reg = registry or REGISTRY
    if root.kind not in reg or reg[root.kind].role != "estimator":
        raise InputError(f"root must be an estimator, got {root.kind!r}")
    for node, parent, _ in root.nodes():
        if node.kind not in reg:
            raise InputError(f"unknown node kind {node.kind!r}")
        spec = reg[node.kind]
        if len(node.children) != spec.arity:
            raise InputError(f"{node.kind} takes {spec.arity} children, has {len(node.children)}")
        if parent is not None and spec.role == "estimator":
            raise InputError(f"estimator {node.kind} below the root")
    if transformer_depth(root) > max_depth:
        raise InputError(f"pipeline deeper than {max_depth}")
    if output_width(root.children[0], n_features) < 1:
        raise InputError("estimator receives no features")


# ------------------------------------------------------------ execution


class _Fitted:
    def __init__(self, node: PipelineNode, obj, children):
        self.node, self.obj, self.children = node, obj, children

    def transform(self, X):
        kind = self.node.kind
        if kind == "input":
            return X
        inputs = [c.transform(X) for c in self.children]
        if kind == "feature-union":
            return feature_union(inputs[0], inputs[1])
        return self.obj.transform(inputs[0])


def _fit_transformer(node: PipelineNode, X, y) -> tuple[_Fitted, np.ndarray]:
    spec = REGISTRY[node.kind]
    if spec.role == "input":
        return _Fitted(node, None, []), X
    fitted_children, outputs = [], []
    for c in node.children:
        fc, out = _fit_transformer(c, X, y)
        fitted_children.append(fc)
        outputs.append(out)
    if node.kind == "feature-union":
        return _Fitted(node, None, fitted_children), feature_union(outputs[0], outputs[1])
    obj = spec.build(node.params).fit(outputs[0], y)
    return _Fitted(node, obj, fitted_children), obj.transform(outputs[0])


class CompiledPipeline:
    """Fit/predict wrapper around a PipelineNode; every stage fits on the rows given to ``fit``."""

    def __init__(self, root: PipelineNode):
        validate_tree(root, n_features=1)
        self.root = root
        self._front: _Fitted | None = None
        self.estimator = None
        self.n_features = None
        self.fitted = False

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        self.n_features = X.shape[1]
        self._front, Z = _fit_transformer(self.root.children[0], X, y)
        self.estimator = REGISTRY[self.root.kind].build(self.root.params).fit(Z, y)
        self.fitted = True
        return self

    def transform(self, X):
        if not self.fitted:
            raise NotFittedError("pipeline used before fit")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got {X.shape[1]}")
        return self._front.transform(X)

    def predict(self, X):
        return self.estimator.predict(self.transform(X))


def fig5_tree(gbt_params: dict | None = None, knn_params: dict | None = None) -> PipelineNode:
    """knn( union( stacking-gbt(input), input ) )"""
    gbt_params = {**REGISTRY["stacking-gbt"].default_params(), **(gbt_params or {})}
    knn_params = {**REGISTRY["knn-regressor"].default_params(), **(knn_params or {})}
    stacked = PipelineNode("stacking-gbt", gbt_params, [inp()])
    return PipelineNode("knn-regressor", knn_params,
                        [PipelineNode("feature-union", {}, [stacked, inp()])])


def fig5_pipeline(train, test, gbt_params: dict | None = None, knn_params: dict | None = None,
                  cv_folds: int | None = None, seed: int = 0) -> tuple[FitReport, CompiledPipeline]:
    """Stacked GBT prediction, union with the raw features, KNN on the result.

    ``train``/``test`` are ``(X, y)`` pairs. Validation MSE is computed by
    k-fold CV on the training part when ``cv_folds`` is given.
    """
    t0 = time.perf_counter()
    Xtr, ytr = (np.asarray(a, dtype=float) for a in train)
    Xte, yte = (np.asarray(a, dtype=float) for a in test)
    tree = fig5_tree(gbt_params, knn_params)
    model = CompiledPipeline(tree).fit(Xtr, ytr)
    val = None
    if cv_folds:
        val = cross_validate(lambda: CompiledPipeline(tree), Xtr, ytr, cv_folds, seed).mean_mse
    report = FitReport(model="fig5", train_mse=mse(ytr, model.predict(Xtr)),
                       test_mse=mse(yte, model.predict(Xte)) if len(yte) else None,
                       validation_mse=val, wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters={"pipeline": tree.to_json()})
    return report, model
