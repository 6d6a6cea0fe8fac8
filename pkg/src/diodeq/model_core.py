"""Regression contract, metrics, cross-validation and grid search."""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from .dataset import kfold_indices
from .errors import (
    DegenerateTargetError,
    DimensionError,
    FitFailure,
    InputError,
    NotFittedError,
    SingularMatrixError,
)


class Regressor(Protocol):
    fitted: bool

    def fit(self, X: np.ndarray, y: np.ndarray) -> "Regressor": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise InputError("empty input")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    d = a - b
    return float(np.mean(d * d))


def r2_score(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    if a.size < 2:
        raise InputError("r2 needs at least 2 samples")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateTargetError("target has zero variance")
    return 1.0 - float(np.sum((a - b) ** 2)) / ss_tot


def linear_least_squares(X, Y) -> np.ndarray:
    """Solution of the normal equations ``(XᵀX) w = XᵀY``, computed through QR."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError("X must be (m, n) with m == len(Y)")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularMatrixError("XᵀX is singular (rank-deficient design)")
    Qm, R = np.linalg.qr(X)
    return np.linalg.solve(R, Qm.T @ Y)


class LinearRegressor:
    """Ordinary least squares with an optional intercept column."""

    def __init__(self, intercept: bool = True):
        self.intercept = intercept
        self.coef_: np.ndarray | None = None
        self.fitted = False

    def _design(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.column_stack([np.ones(len(X)), X]) if self.intercept else X

    def fit(self, X, y):
        self.coef_ = linear_least_squares(self._design(X), y)
        self.fitted = True
        return self

    def predict(self, X):
        if not self.fitted:
            raise NotFittedError("LinearRegressor.predict called before fit")
        D = self._design(X)
        if D.shape[1] != len(self.coef_):
            raise DimensionError("feature count differs from training")
        return D @ self.coef_


@dataclass
class FitReport:
    model: str
    train_mse: float
    test_mse: float | None = None
    validation_mse: float | None = None
    r2: float | None = None
    wall_time_seconds: float = 0.0
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train_mse", "test_mse", "validation_mse"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name} must be non-negative")
        if self.r2 is not None and self.r2 > 1 + 1e-12:
            raise InputError("r2 cannot exceed 1")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "FitReport":
        return cls(**obj)


@dataclass
class CVResult:
    mean_mse: float
    fold_mse: list[float]


def cross_validate(factory: Callable[[], Any], X, y, k: int = 13, seed: int = 0,
                   workers: int = 1) -> CVResult:
    """k-fold cross-validation of the model built by ``factory``.

    Fold scores are reduced in fold order, so the result does not depend on
    ``workers``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    folds = kfold_indices(len(y), k, seed)
    everything = np.arange(len(y))

    def run(i):
        val = folds[i]
        train = np.setdiff1d(everything, val, assume_unique=True)
        try:
            model = factory().fit(X[train], y[train])
            return mse(y[val], model.predict(X[val]))
        except Exception as exc:
            raise FitFailure(f"fold {i}: {exc}", fold=i) from exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            scores = list(pool.map(run, range(k)))
    else:
        scores = [run(i) for i in range(k)]
    return CVResult(mean_mse=float(np.mean(scores)), fold_mse=scores)


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Cartesian product of a parameter grid, in key then value order."""
    if not grid:
        return [{}]
    keys = list(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


@dataclass
class GridResult:
    best_params: dict
    best_score: float
    scores: list[tuple[dict, float]]
    report: FitReport


def grid_search(family: Callable[..., Any], grid: dict[str, list] | list[dict], X, y,
                k: int = 13, seed: int = 0, name: str = "model") -> GridResult:
    """Exhaustive search minimising mean CV MSE; ties keep the earliest combination."""
    combos = grid if isinstance(grid, list) else expand_grid(grid)
    if not combos:
        raise InputError("empty parameter grid")
    t0 = time.perf_counter()
    scores: list[tuple[dict, float]] = []
    errors = []
    for params in combos:
        try:
            res = cross_validate(lambda: family(**params), X, y, k, seed)
            scores.append((params, res.mean_mse))
        except FitFailure as exc:
            errors.append(f"{params}: {exc}")
            scores.append((params, float("inf")))
    finite = [s for s in scores if np.isfinite(s[1])]
    if not finite:
        raise FitFailure("every grid combination failed: " + "; ".join(errors))
    best_params, best = scores[0]
    for params, s in scores[1:]:
        if s < best:
            best_params, best = params, s
    report = FitReport(model=name, train_mse=0.0, validation_mse=best,
                       wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters=dict(best_params))
    model = family(**best_params).fit(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
    report.train_mse = mse(y, model.predict(np.asarray(X, dtype=float)))
    return GridResult(best_params, best, scores, report)

