"""Variational single-qumode circuit regressor.

Each input row is encoded as a displaced squeezed state (voltage drives the
displacement, light intensity the squeezing), pushed through a stack of
parametrised layers and read out as the x-quadrature expectation. Training
uses central finite differences and Adam.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .dataset import IVDataset, ScalerParams, apply_scaler, fit_scaler
from .errors import DimensionError, DivergenceError, InputError, TruncationError
from .mlp import _adam_update
from .model_core import FitReport

N_LAYERS = 8
PARAMS_PER_LAYER = 5
LAYER_FIELDS = ("theta1", "r", "theta2", "d", "kappa")
ALPHA_RANGE = (-1.1, 1.0)
R_RANGE = (0.0, 0.8)
TARGET_SCALE = 1e3
LAMBDA = 0.01
LAYER_LEAK_TOLERANCE = 0.1
ABORT_TRACE = 0.9


@dataclass(frozen=True)
class QnnLayerParams:
    theta1: float = 0.0
    r: float = 0.0
    theta2: float = 0.0
    d: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(getattr(self, f)) for f in LAYER_FIELDS):
            raise InputError("layer parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in LAYER_FIELDS])


@dataclass(frozen=True)
class EncodedInput:
    alpha: float
    r: float
    extrapolated: bool = False


@dataclass
class QnnModel:
    """Circuit parameters, input encoders and loss settings.

    ``params`` has shape ``(n_layers, 5)`` with columns ordered as
    ``LAYER_FIELDS``. ``encoding='absolute'`` uses ``|alpha|`` instead of the
    signed displacement.
    """

    params: np.ndarray
    voltage_scaler: ScalerParams
    intensity_scaler: ScalerParams
    target_scale: float = TARGET_SCALE
    cutoff: int = fock.DEFAULT_CUTOFF
    lam: float = LAMBDA
    encoding: str = "signed"
    layer_leak_tolerance: float = LAYER_LEAK_TOLERANCE

    def __post_init__(self):
        self.params = np.array(self.params, dtype=np.float64).reshape(-1, PARAMS_PER_LAYER)
        if not np.all(np.isfinite(self.params)):
            raise InputError("circuit parameters must be finite")
        if self.lam < 0:
            raise InputError("lambda must be non-negative")
        if self.encoding not in ("signed", "absolute"):
            raise InputError(f"unknown encoding {self.encoding!r}")
        if self.cutoff < 2:
            raise InputError("cutoff must be at least 2")

    @property
    def n_layers(self) -> int:
        return self.params.shape[0]

    def layers(self) -> list[QnnLayerParams]:
        return [QnnLayerParams(*row) for row in self.params]

    def with_params(self, flat) -> "QnnModel":
        return QnnModel(np.asarray(flat, dtype=float).reshape(self.params.shape),
                        self.voltage_scaler, self.intensity_scaler, self.target_scale,
                        self.cutoff, self.lam, self.encoding, self.layer_leak_tolerance)

    def to_json(self) -> dict:
        return {"kind": "qnn", "layers": [dict(zip(LAYER_FIELDS, map(float, row))) for row in self.params],
                "voltage_scaler": self.voltage_scaler.to_json(),
                "intensity_scaler": self.intensity_scaler.to_json(),
                "target_scale": self.target_scale, "cutoff": self.cutoff, "lambda": self.lam,
                "encoding": self.encoding, "layer_leak_tolerance": self.layer_leak_tolerance}

    @classmethod
    def from_json(cls, obj: dict) -> "QnnModel":
        params = np.array([[layer[f] for f in LAYER_FIELDS] for layer in obj["layers"]])
        return cls(params, ScalerParams.from_json(obj["voltage_scaler"]),
                   ScalerParams.from_json(obj["intensity_scaler"]), obj["target_scale"],
                   obj["cutoff"], obj["lambda"], obj.get("encoding", "signed"),
                   obj.get("layer_leak_tolerance", LAYER_LEAK_TOLERANCE))


def init_model(train: IVDataset, seed: int = 0, init_std: float = 1e-3, n_layers: int = N_LAYERS,
               **kwargs) -> QnnModel:
    """Fit the encoders on the training rows and draw seeded Gaussian parameters."""
    if init_std < 0:
        raise InputError("init_std must be non-negative")
    v_sc = fit_scaler(train.voltage, "min-max", ALPHA_RANGE)
    p_sc = fit_scaler(train.intensity, "min-max", R_RANGE)
    params = np.random.default_rng(seed).normal(0.0, init_std, (n_layers, PARAMS_PER_LAYER))
    return QnnModel(params, v_sc, p_sc, **kwargs)


def encode(model: QnnModel, voltage, intensity) -> list[EncodedInput]:
    """Min-max encode rows; values outside the training range extrapolate and are flagged."""
    alpha, r = _encode_arrays(model, voltage, intensity)
    out = []
    for a, s in zip(alpha, r):
        flagged = not (ALPHA_RANGE[0] - 1e-12 <= a <= ALPHA_RANGE[1] + 1e-12
                       and R_RANGE[0] - 1e-12 <= s <= R_RANGE[1] + 1e-12)
        out.append(EncodedInput(float(a), float(s), flagged))
    return out


def _encode_arrays(model: QnnModel, voltage, intensity):
    V = np.atleast_1d(np.asarray(voltage, dtype=float))
    P = np.atleast_1d(np.asarray(intensity, dtype=float))
    if V.shape != P.shape:
        raise DimensionError("voltage and intensity differ in length")
    alpha = apply_scaler(model.voltage_scaler, V[:, None])[:, 0]
    r = apply_scaler(model.intensity_scaler, P[:, None])[:, 0]
    if model.encoding == "absolute":
        alpha = np.abs(alpha)
    return alpha, np.maximum(r, 0.0)


def prepare_states(model: QnnModel, alpha, r) -> np.ndarray:
    """Encoded states D(alpha) S(r)|0> as columns of a ``(D, m)`` matrix."""
    D = model.cutoff
    vac = np.zeros(D, dtype=complex)
    vac[0] = 1.0
    cols = []
    for a, s in zip(np.atleast_1d(alpha), np.atleast_1d(r)):
        psi = fock.real_gate_matrix("squeezing", float(s), D) @ vac
        cols.append(fock.real_gate_matrix("displacement", float(a), D) @ psi)
    return np.array(cols, dtype=complex).T.reshape(D, -1)


def evolve(params: np.ndarray, states: np.ndarray, cutoff: int,
           layer_leak_tolerance: float | None = LAYER_LEAK_TOLERANCE) -> np.ndarray:
    """Apply every layer R(t1) S(r) R(t2) D(d) K(kappa) to the state columns."""
    psi = states
    n = np.arange(cutoff, dtype=float)
    for i, (t1, r, t2, d, k) in enumerate(np.asarray(params).reshape(-1, PARAMS_PER_LAYER)):
        psi = np.exp(1j * t1 * n)[:, None] * psi
        psi = fock.real_gate_matrix("squeezing", r, cutoff) @ psi
        psi = np.exp(1j * t2 * n)[:, None] * psi
        psi = fock.real_gate_matrix("displacement", d, cutoff) @ psi
        psi = np.exp(1j * k * n * n)[:, None] * psi
        if layer_leak_tolerance is not None:
            leak = float(np.max(1.0 - np.sum(np.abs(psi) ** 2, axis=0)))
            if leak > layer_leak_tolerance:
                raise TruncationError(f"layer {i} leaked {leak:.3e} of the norm", leak=leak, layer=i)
    return psi


def run_circuit(params: np.ndarray, states: np.ndarray, cutoff: int,
                layer_leak_tolerance: float | None = LAYER_LEAK_TOLERANCE):
    """``(<x>, trace)`` per state column after the circuit."""
    psi = evolve(params, states, cutoff, layer_leak_tolerance)
    x = fock.ladder_matrices(cutoff)[3]
    xs = np.einsum("im,ij,jm->m", psi.conj(), x, psi).real
    trace = np.sum(np.abs(psi) ** 2, axis=0)
    return xs, trace


def forward(model: QnnModel, voltage, intensity):
    """Scaled prediction ``<x>`` and trace for each row."""
    alpha, r = _encode_arrays(model, voltage, intensity)
    return run_circuit(model.params, prepare_states(model, alpha, r), model.cutoff,
                       model.layer_leak_tolerance)


def predict(model: QnnModel, voltage, intensity) -> np.ndarray:
    """Predicted current in the original units."""
    return forward(model, voltage, intensity)[0] / model.target_scale


def loss_from_outputs(xs, trace, targets, lam: float) -> float:
    targets = np.asarray(targets, dtype=float)
    xs = np.asarray(xs, dtype=float)
    trace = np.asarray(trace, dtype=float)
    if len(targets) == 0:
        raise InputError("empty batch")
    return float(np.mean((targets - xs) ** 2) + lam * np.mean(1.0 - trace))


def loss(model: QnnModel, states: np.ndarray, targets) -> float:
    """Trace-regularised MSE on pre-scaled targets for prepared state columns."""
    xs, tr = run_circuit(model.params, states, model.cutoff, model.layer_leak_tolerance)
    return loss_from_outputs(xs, tr, targets, model.lam)


def gradient(model: QnnModel, states: np.ndarray, targets, h: float = 1e-3,
             workers: int = 1) -> np.ndarray:
    """Central finite-difference gradient over every circuit parameter, shape ``params.shape``."""
    flat = model.params.ravel()

    def at(theta):
        xs, tr = run_circuit(theta, states, model.cutoff, model.layer_leak_tolerance)
        return loss_from_outputs(xs, tr, targets, model.lam)

    def component(j):
        up, dn = flat.copy(), flat.copy()
        up[j] += h
        dn[j] -= h
        return (at(up) - at(dn)) / (2 * h)

    idx = range(flat.size)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            g = list(ex.map(component, idx))
    else:
        g = [component(j) for j in idx]
    return np.array(g).reshape(model.params.shape)


@dataclass
class QnnTrainResult:
    model: QnnModel
    history: list[tuple[int, float, float | None, float]] = field(default_factory=list)
    report: FitReport | None = None


def train(model: QnnModel, train_ds: IVDataset, test_ds: IVDataset | None = None,
          epochs: int = 500, batch_size: int = 32, lr: float = 0.005, seed: int = 0,
          h: float = 1e-3, workers: int = 1, progress=None) -> QnnTrainResult:
    """Seeded minibatch Adam on finite-difference gradients.

    History rows are ``(epoch, train_loss, test_loss, min_trace)`` with epoch
    0 the initial model. Aborts with DivergenceError on a non-finite loss or
    when any training state's trace drops below 0.9.
    """
    if epochs < 0 or batch_size < 1 or not lr > 0:
        raise InputError("invalid training hyperparameters")
    t0 = time.perf_counter()
    states = prepare_states(model, *_encode_arrays(model, train_ds.voltage, train_ds.intensity))
    y = np.asarray(train_ds.current, dtype=float) * model.target_scale
    if test_ds is not None and len(test_ds):
        te_states = prepare_states(model, *_encode_arrays(model, test_ds.voltage, test_ds.intensity))
        y_te = np.asarray(test_ds.current, dtype=float) * model.target_scale
    else:
        te_states = None
    rng = np.random.default_rng(seed)
    m = np.zeros_like(model.params)
    v = np.zeros_like(model.params)
    step = 0
    history = []

    def evaluate(mod, epoch):
        xs, tr = run_circuit(mod.params, states, mod.cutoff, mod.layer_leak_tolerance)
        tl = loss_from_outputs(xs, tr, y, mod.lam)
        te = None
        if te_states is not None:
            xt, trt = run_circuit(mod.params, te_states, mod.cutoff, mod.layer_leak_tolerance)
            te = loss_from_outputs(xt, trt, y_te, mod.lam)
        min_tr = float(np.min(tr))
        if not math.isfinite(tl) or (te is not None and not math.isfinite(te)):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        if min_tr < ABORT_TRACE:
            raise DivergenceError(f"trace fell to {min_tr:.3f} at epoch {epoch}", epoch=epoch)
        history.append((epoch, tl, te, min_tr))
        if progress is not None:
            progress(epoch, tl, te, min_tr)

    n = states.shape[1]
    try:
        evaluate(model, 0)
        for epoch in range(1, epochs + 1):
            perm = rng.permutation(n)
            for start in range(0, n, batch_size):
                b = perm[start:start + batch_size]
                g = gradient(model, states[:, b], y[b], h, workers)
                if not np.all(np.isfinite(g)):
                    raise DivergenceError(f"non-finite gradient at epoch {epoch}", epoch=epoch)
                step += 1
                p, m, v = _adam_update(model.params, g, m, v, step, lr, 0.9, 0.999, 1e-8)
                model = model.with_params(p)
            evaluate(model, epoch)
    except (DivergenceError, TruncationError) as exc:
        exc.history = list(history)  # partial history for the caller's report
        raise
    last = history[-1]
    report = FitReport(model="qnn", train_mse=last[1], test_mse=last[2],
                       wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters={"epochs": epochs, "batch_size": batch_size, "lr": lr,
                                        "seed": seed, "h": h, "n_layers": model.n_layers,
                                        "cutoff": model.cutoff, "lambda": model.lam,
                                        "encoding": model.encoding, "loss_units": "scaled"})
    return QnnTrainResult(model, history, report)


def history_csv(history) -> str:
    lines = ["epoch,train_loss,test_loss,min_trace"]
    for e, tr, te, mt in history:
        lines.append(f"{e},{tr!r},{'' if te is None else repr(te)},{mt!r}")
    return "\n".join(lines) + "\n"
