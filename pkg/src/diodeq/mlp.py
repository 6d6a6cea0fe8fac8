"""Feedforward network with ReLU hidden layers, hand-written backprop and Adam."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, InputError, NotFittedError
from .model_core import FitReport, mse


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: tuple[int, ...] = (2, 16, 32, 32, 16, 1)
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 1000
    init_seed: int = 0
    init_std: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise InputError("need at least one hidden layer")
        if any(s < 1 for s in sizes):
            raise InputError("layer sizes must be positive")
        if self.batch_size < 1 or self.epochs < 0 or not self.learning_rate > 0:
            raise InputError("invalid training hyperparameters")

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1))


@dataclass
class LayerWeights:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


def init_weights(config: MlpConfig) -> list[LayerWeights]:
    rng = np.random.default_rng(config.init_seed)
    s = config.layer_sizes
    return [LayerWeights(rng.normal(0.0, config.init_std, (s[i + 1], s[i])),
                         rng.normal(0.0, config.init_std, s[i + 1]))
            for i in range(len(s) - 1)]


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    return (x > 0).astype(np.float64)  # derivative at 0 taken as 0


def forward(weights: list[LayerWeights], X):
    """Returns predictions (m,) and the per-layer cache ``(pre, post)``.

    ``pre[n]`` is the input to layer n's activation, ``post[n]`` its output;
    ``post[0]`` is the raw input and the last layer is linear.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != weights[0].w.shape[1]:
        raise DimensionError(f"input has {X.shape[1]} features, network expects {weights[0].w.shape[1]}")
    pre, post = [X], [X]
    y = X
    last = len(weights) - 1
    for n, layer in enumerate(weights):
        x = y @ layer.w.T + layer.b
        y = x if n == last else relu(x)
        pre.append(x)
        post.append(y)
    return y[:, 0], (pre, post)


def backward(weights: list[LayerWeights], X, targets, cache=None):
    """Gradients of the batch-mean squared error; returns ``(loss, grads)``."""
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if cache is None:
        pred, cache = forward(weights, X)
    else:
        pred = cache[1][-1][:, 0]
    if len(pred) != len(targets):
        raise DimensionError("targets and inputs differ in length")
    pre, post = cache
    m = len(targets)
    resid = pred - targets
    loss = float(np.mean(resid * resid))
    delta = (2.0 / m) * resid[:, None]  # dE/dx at the linear output
    grads: list[LayerWeights] = [None] * len(weights)  # type: ignore[list-item]
    for n in range(len(weights) - 1, -1, -1):
        grads[n] = LayerWeights(delta.T @ post[n], delta.sum(axis=0))
        if n > 0:
            delta = (delta @ weights[n].w) * relu_grad(pre[n])
    return loss, grads


@dataclass
class AdamState:
    m: list[LayerWeights]
    v: list[LayerWeights]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: list[LayerWeights], beta1=0.9, beta2=0.999, eps=1e-8):
        z = lambda: [LayerWeights(np.zeros_like(p.w), np.zeros_like(p.b)) for p in params]
        return cls(z(), z(), 0, beta1, beta2, eps)


def _adam_update(p, g, m, v, t, lr, b1, b2, eps):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1 ** t)
    vhat = v / (1 - b2 ** t)
    return p - lr * mhat / (np.sqrt(vhat) + eps), m, v


def adam_step(state: AdamState, params: list[LayerWeights], grads: list[LayerWeights],
              lr: float = 1e-3) -> tuple[list[LayerWeights], AdamState]:
    """One bias-corrected Adam update; inputs are not modified."""
    if len(params) != len(grads):
        raise DimensionError("parameter/gradient count mismatch")
    t = state.step + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.w.shape != g.w.shape or p.b.shape != g.b.shape:
            raise DimensionError("parameter/gradient shape mismatch")
        w, mw, vw = _adam_update(p.w, g.w, m.w, v.w, t, lr, state.beta1, state.beta2, state.eps)
        b, mb, vb = _adam_update(p.b, g.b, m.b, v.b, t, lr, state.beta1, state.beta2, state.eps)
        new_p.append(LayerWeights(w, b))
        new_m.append(LayerWeights(mw, mb))
        new_v.append(LayerWeights(vw, vb))
    return new_p, AdamState(new_m, new_v, t, state.beta1, state.beta2, state.eps)


@dataclass
class TrainResult:
    weights: list[LayerWeights]
    history: list[tuple[int, float, float | None]] = field(default_factory=list)
    report: FitReport | None = None


def train(config: MlpConfig, X_train, y_train, X_test=None, y_test=None,
          weights: list[LayerWeights] | None = None) -> TrainResult:
    """Seeded minibatch Adam; history rows are ``(epoch, train_mse, test_mse)``."""
    t0 = time.perf_counter()
    X_train = np.atleast_2d(np.asarray(X_train, dtype=np.float64))
    y_train = np.asarray(y_train, dtype=np.float64).ravel()
    params = weights if weights is not None else init_weights(config)
    state = AdamState.zeros_like(params, config.beta1, config.beta2, config.eps)
    rng = np.random.default_rng(config.init_seed + 1)
    history = []
    n = len(y_train)
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            loss, grads = backward(params, X_train[batch], y_train[batch])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss in epoch {epoch}", epoch=epoch)
            params, state = adam_step(state, params, grads, config.learning_rate)
        train_mse = mse(y_train, forward(params, X_train)[0])
        test_mse = None
        if X_test is not None and len(X_test):
            test_mse = mse(y_test, forward(params, X_test)[0])
        if not math.isfinite(train_mse) or (test_mse is not None and not math.isfinite(test_mse)):
            raise DivergenceError(f"non-finite loss in epoch {epoch}", epoch=epoch)
        history.append((epoch, train_mse, test_mse))
    report = FitReport(model="mlp", train_mse=history[-1][1] if history else
                       mse(y_train, forward(params, X_train)[0]),
                       test_mse=history[-1][2] if history else None,
                       wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters=asdict(config))
    return TrainResult(params, history, report)


def weights_to_json(config: MlpConfig, weights: list[LayerWeights]) -> dict:
    return {"config": asdict(config),
            "layers": [{"w": l.w.tolist(), "b": l.b.tolist()} for l in weights]}


def weights_from_json(obj: dict) -> tuple[MlpConfig, list[LayerWeights]]:
    cfg = obj["config"]
    config = MlpConfig(**{**cfg, "layer_sizes": tuple(cfg["layer_sizes"])})
    return config, [LayerWeights(np.array(l["w"], dtype=float), np.array(l["b"], dtype=float))
                    for l in obj["layers"]]


class MlpRegressor:
    """Model-contract wrapper: standard-scales features and optionally targets."""

    def __init__(self, config: MlpConfig | None = None, target_scale: float = 1.0, **kwargs):
        self.config = config if config is not None else MlpConfig(**kwargs)
        self.target_scale = target_scale
        self.mean_: np.ndarray | None = None
        self.std_: np.ndarray | None = None
        self.weights: list[LayerWeights] | None = None
        self.result: TrainResult | None = None
        self.fitted = False

    def _scale(self, X):
        return (np.atleast_2d(np.asarray(X, dtype=float)) - self.mean_) / self.std_

    def fit(self, X, y, X_test=None, y_test=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.std_ = np.where(std > 0, std, 1.0)
        ys = np.asarray(y, dtype=float) * self.target_scale
        yt = None if y_test is None else np.asarray(y_test, dtype=float) * self.target_scale
        Xt = None if X_test is None else self._scale(X_test)
        self.result = train(self.config, self._scale(X), ys, Xt, yt)
        self.weights = self.result.weights
        self.fitted = True
        return self

    def predict(self, X):
        if not self.fitted:
            raise NotFittedError("MlpRegressor used before fit")
        return forward(self.weights, self._scale(X))[0] / self.target_scale

    def to_json(self) -> dict:
        if not self.fitted:
            raise NotFittedError("cannot serialise an unfitted model")
        return {"kind": "mlp", **weights_to_json(self.config, self.weights),
                "feature_mean": self.mean_.tolist(), "feature_std": self.std_.tolist(),
                "target_scale": self.target_scale}

    @classmethod
    def from_json(cls, obj: dict) -> "MlpRegressor":
        config, weights = weights_from_json(obj)
        model = cls(config, obj.get("target_scale", 1.0))
        model.weights = weights
        model.mean_ = np.array(obj["feature_mean"])
        model.std_ = np.array(obj["feature_std"])
        model.fitted = True
        return model
