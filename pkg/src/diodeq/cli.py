"""Command-line entry point: ``diodeq {stats,train,compare,physics,wigner}``.

Exit codes: 0 success, 2 input or validation error, 3 computation error.
Every JSON report keeps its timestamp and wall-clock figures under a
``metadata`` key so reruns can be compared byte for byte without it.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, fock, physics, qnn
from .dataset import (IVDataset, ScalerParams, apply_scaler, fit_scaler, load_csv,
                      split_indices, summary_stats)
from .errors import ComputationError, DimensionError, InputError, SchemaError
from .knn import KnnConfig, KnnRegressor
from .mlp import MlpConfig, MlpRegressor
from .model_core import FitReport, mse
from .pipeline import CompiledPipeline, GpConfig, PipelineNode, fig5_pipeline, gp_search

log = logging.getLogger("diodeq")

TEST_FRACTION = 0.15
# fixed offsets from the global seed
SEED_INIT, SEED_SHUFFLE, SEED_SEARCH, SEED_CV = 1, 2, 3, 4


# ------------------------------------------------------------------ output


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _metadata(**extra) -> dict:
    return {"timestamp": datetime.now(timezone.utc).isoformat(), "version": __version__, **extra}


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    path = Path(args.config)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InputError("config must be a JSON object")
    return obj


def _stable_report(report: FitReport) -> tuple[dict, float]:
    d = report.to_json()
    return d, d.pop("wall_time_seconds")


# ------------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    ds = load_csv(args.input)
    stats = summary_stats(ds)
    out = _out_dir(args)
    _dump(out / "report.json", {"input": str(args.input), "rows": len(ds), "stats": stats,
                                "metadata": _metadata()})
    cols = list(stats)
    keys = list(next(iter(stats.values())))
    print(f"{'':>8}" + "".join(f"{c:>20}" for c in cols))
    for k in keys:
        print(f"{k:>8}" + "".join(f"{stats[c][k]:>20.6g}" for c in cols))
    return 0


# ------------------------------------------------------------------- train


def _split(ds: IVDataset, seed: int):
    tr, te = split_indices(len(ds), TEST_FRACTION, seed)
    return tr, te, ds.subset(tr, "train"), ds.subset(te, "test")


class ScaledKnn:
    """IQR-robust feature scaling followed by KNN."""

    def __init__(self, config: KnnConfig):
        self.config = config
        self.scaler = None
        self.knn = KnnRegressor(config)

    def fit(self, X, y):
        self.scaler = fit_scaler(X, "iqr-robust")
        self.knn.fit(apply_scaler(self.scaler, X), y)
        return self

    def predict(self, X):
        X = np.atleast_2d(X)
        if X.shape[1] != len(self.scaler.location):
            raise DimensionError(f"model expects {len(self.scaler.location)} features, got {X.shape[1]}")
        return self.knn.predict(apply_scaler(self.scaler, X))

    def to_json(self):
        return {"kind": "knn", "scaler": self.scaler.to_json(), "model": self.knn.to_json()}


def _train_knn(cfg, args, train, test):
    params = {"k": 4, "p": 4.0, "weighting": "inverse-distance", "search": "brute", **cfg}
    if args.k is not None:
        params["k"] = args.k
    if args.p is not None:
        params["p"] = args.p
    t0 = time.perf_counter()
    model = ScaledKnn(KnnConfig(**params)).fit(train.features, train.targets)
    report = FitReport("knn", mse(train.targets, model.predict(train.features)),
                       mse(test.targets, model.predict(test.features)) if len(test) else None,
                       wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters=KnnConfig(**params).to_json())
    return report, model.to_json(), None


def _train_mlp(cfg, args, train, test):
    cfg = dict(cfg)
    target_scale = float(cfg.pop("target_scale", 1e3))
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    if args.lr is not None:
        cfg["learning_rate"] = args.lr
    cfg.setdefault("init_seed", args.seed + SEED_INIT)
    known = {f.name for f in fields(MlpConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise InputError(f"unknown mlp config keys {sorted(unknown)}")
    model = MlpRegressor(MlpConfig(**cfg), target_scale=target_scale)
    model.fit(train.features, train.targets, test.features, test.targets)
    rep = model.result.report
    report = FitReport("mlp", mse(train.targets, model.predict(train.features)),
                       mse(test.targets, model.predict(test.features)) if len(test) else None,
                       wall_time_seconds=rep.wall_time_seconds,
                       hyperparameters={**rep.hyperparameters, "target_scale": target_scale})
    history = (("epoch", "train_mse_scaled", "test_mse_scaled"), model.result.history)
    return report, model.to_json(), history


def _pipeline_json(tree: PipelineNode, train: IVDataset) -> dict:
    # fitted pipelines are rebuilt deterministically from the tree and training rows
    return {"kind": "pipeline", "tree": tree.to_json(), "X": train.features.tolist(),
            "y": train.targets.tolist()}


def _train_fig5(cfg, args, train, test):
    report, model = fig5_pipeline((train.features, train.targets), (test.features, test.targets),
                                  cfg.get("gbt"), cfg.get("knn"), cfg.get("cv_folds"),
                                  seed=args.seed + SEED_CV)
    return report, _pipeline_json(model.root, train), None


def _train_gp(cfg, args, train, test):
    cfg = dict(cfg)
    if args.generations is not None:
        cfg["generations"] = args.generations
    cfg.setdefault("seed", args.seed + SEED_SEARCH)
    if "kinds" in cfg:
        cfg["kinds"] = tuple(cfg["kinds"])
    config = GpConfig(**cfg)
    t0 = time.perf_counter()
    result = gp_search(config, train.features, train.targets)
    model = CompiledPipeline(result.best).fit(train.features, train.targets)
    report = FitReport("gp", mse(train.targets, model.predict(train.features)),
                       mse(test.targets, model.predict(test.features)) if len(test) else None,
                       validation_mse=result.best_fitness if np.isfinite(result.best_fitness) else None,
                       wall_time_seconds=time.perf_counter() - t0,
                       hyperparameters={**asdict(config), "best": str(result.best)})
    history = (("generation", "best_fitness", "mean_finite_fitness"), result.history)
    return report, _pipeline_json(result.best, train), history


def _train_qnn(cfg, args, train, test):
    cfg = dict(cfg)
    epochs = args.epochs if args.epochs is not None else int(cfg.pop("epochs", 500))
    cfg.pop("epochs", None)
    lr = args.lr if args.lr is not None else float(cfg.pop("lr", 0.005))
    cfg.pop("lr", None)
    batch = int(cfg.pop("batch_size", 32))
    init_std = float(cfg.pop("init_std", 1e-3))
    model_keys = {"n_layers", "cutoff", "lam", "encoding", "target_scale", "layer_leak_tolerance"}
    unknown = set(cfg) - model_keys
    if unknown:
        raise InputError(f"unknown qnn config keys {sorted(unknown)}")
    model = qnn.init_model(train, seed=args.seed + SEED_INIT, init_std=init_std, **cfg)
    try:
        res = qnn.train(model, train, test, epochs=epochs, batch_size=batch, lr=lr,
                        seed=args.seed + SEED_SHUFFLE)
    except ComputationError as exc:
        exc.partial = (("epoch", "train_loss", "test_loss", "min_trace"),
                       getattr(exc, "history", [])[1:])
        raise
    trained = res.model
    report = FitReport("qnn", mse(train.targets, qnn.predict(trained, train.voltage, train.intensity)),
                       mse(test.targets, qnn.predict(trained, test.voltage, test.intensity))
                       if len(test) else None,
                       wall_time_seconds=res.report.wall_time_seconds,
                       hyperparameters={**res.report.hyperparameters, "init_std": init_std,
                                        "initial_loss": res.history[0][1],
                                        "final_loss": res.history[-1][1]})
    history = (("epoch", "train_loss", "test_loss", "min_trace"), res.history[1:])
    return report, trained.to_json(), history


TRAINERS = {"knn": _train_knn, "mlp": _train_mlp, "fig5": _train_fig5, "gp": _train_gp,
            "qnn": _train_qnn}


def cmd_train(args) -> int:
    ds = load_csv(args.input)
    cfg = _load_config(args)
    tr_idx, te_idx, train, test = _split(ds, args.seed)
    out = _out_dir(args)
    _dump(out / "split_manifest.json", {"seed": args.seed, "test_fraction": TEST_FRACTION,
                                        "n_rows": len(ds), "train_indices": tr_idx.tolist(),
                                        "test_indices": te_idx.tolist()})
    try:
        report, model_obj, history = TRAINERS[args.model](cfg, args, train, test)
    except TypeError as exc:
        raise InputError(f"invalid {args.model} configuration: {exc}") from exc
    except ComputationError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            _write_rows(out / "history.csv", *partial)
        _dump(out / "report.json", {"model": args.model, "error": str(exc),
                                    "error_type": type(exc).__name__,
                                    "epoch": getattr(exc, "epoch", None),
                                    "metadata": _metadata()})
        raise
    stable, wall = _stable_report(report)
    model_obj = {**model_obj, "n_features": 2, "report": stable}
    _dump(out / "model.json", model_obj)
    _dump(out / "report.json", {"model": args.model, "seed": args.seed, "report": stable,
                                "metadata": _metadata(wall_time_seconds=wall)})
    if history is not None:
        _write_rows(out / "history.csv", *history)
    print(f"{args.model}: train MSE {report.train_mse:.4e}, test MSE "
          f"{report.test_mse if report.test_mse is None else format(report.test_mse, '.4e')}")
    return 0


# ----------------------------------------------------------------- compare


def load_model(obj: dict):
    """Prediction callable ``f(IVDataset) -> currents`` for a saved model file."""
    kind = obj.get("kind") if isinstance(obj, dict) else None
    try:
        if kind == "knn":
            m = ScaledKnn(KnnConfig.from_json(obj["model"]["config"]))
            m.scaler = ScalerParams.from_json(obj["scaler"])
            m.knn = KnnRegressor.from_json(obj["model"])
            return lambda ds: m.predict(ds.features)
        if kind == "mlp":
            m = MlpRegressor.from_json(obj)
            return lambda ds: m.predict(ds.features)
        if kind == "pipeline":
            m = CompiledPipeline(PipelineNode.from_json(obj["tree"])).fit(
                np.array(obj["X"], dtype=float), np.array(obj["y"], dtype=float))
            return lambda ds: m.predict(ds.features)
        if kind == "qnn":
            m = qnn.QnnModel.from_json(obj)
            return lambda ds: qnn.predict(m, ds.voltage, ds.intensity)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed {kind} model file: {exc}") from exc
    raise SchemaError(f"unrecognised model file kind {kind!r}")


def cmd_compare(args) -> int:
    ds = load_csv(args.input)
    rows = []
    for path in args.models:
        path = Path(path)
        if not path.exists():
            raise InputError(f"model file not found: {path}")
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path} is not valid JSON") from exc
        predict = load_model(obj)
        if obj.get("n_features", 2) != ds.features.shape[1]:
            raise DimensionError(f"{path} expects {obj.get('n_features')} features")
        stored = obj.get("report", {})
        rows.append({"model_file": str(path), "model": stored.get("model", obj.get("kind")),
                     "train_mse": stored.get("train_mse"), "test_mse": stored.get("test_mse"),
                     "validation_mse": stored.get("validation_mse"),
                     "dataset_mse": mse(ds.targets, predict(ds))})
    out = _out_dir(args)
    _dump(out / "report.json", {"input": str(args.input), "rows": rows, "metadata": _metadata()})
    cols = ("model", "train_mse", "test_mse", "validation_mse", "dataset_mse")
    fmt = lambda v: "-" if v is None else (f"{v:.4e}" if isinstance(v, float) else str(v))
    widths = [max(len(c), *(len(fmt(r[c])) for r in rows)) for c in cols]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for r in rows:
        print("  ".join(fmt(r[c]).ljust(w) for c, w in zip(cols, widths)))
    return 0


# ----------------------------------------------------------------- physics


def _two_column_csv(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if data.shape[0] == 0 or data.shape[1] < 2:
        raise InputError(f"{path}: need at least two numeric columns")
    return data[:, 0], data[:, 1]


def cmd_physics(args) -> int:
    cfg_obj = _load_config(args)
    config = physics.DeviceConfig.from_json(cfg_obj) if cfg_obj else physics.DeviceConfig()
    ds = load_csv(args.input)
    groups = physics.group_by_intensity(ds.voltage, ds.intensity, ds.current)
    for extra in args.illuminated or []:
        eds = load_csv(extra)
        groups.update({p: iv for p, iv in physics.group_by_intensity(
            eds.voltage, eds.intensity, eds.current).items() if p != 0.0})
    if 0.0 not in groups:
        raise InputError("no dark (zero-intensity) rows in the input")
    dark = groups.pop(0.0)
    transient = _two_column_csv(args.transient) if args.transient else None
    spectrum = _two_column_csv(args.spectrum) if args.spectrum else None
    report = physics.extract_report(dark, groups, config, transient, spectrum,
                                    tuple(args.spectrum_window) if args.spectrum_window else None)
    out = _out_dir(args)
    _dump(out / "report.json", {**report, "metadata": _metadata()})
    for name, rows in physics.figure_tables(dark, groups, config).items():
        _write_rows(out / f"{name}.csv", physics.TABLE_HEADERS[name], rows)
    ok = sum(1 for e in report["conditions"].values() if "n" in e)
    print(f"physics: {len(report['conditions'])} conditions, {ok} with ideality fits, "
          f"{len(report['failures'])} stage failures, skipped {report['skipped']}")
    return 0 if _any_stage_succeeded(report) else 3


def _any_stage_succeeded(report: dict) -> bool:
    if any(set(e) - {"intensity_mW_cm2"} for e in report["conditions"].values()):
        return True
    if any(v is not None for v in (report.get("figures_of_merit") or {}).values()):
        return True
    return report.get("transient") is not None or report.get("band_gap") is not None


# ------------------------------------------------------------------ wigner


def cmd_wigner(args) -> int:
    D = args.cutoff
    if args.qnn_model:
        obj = json.loads(Path(args.qnn_model).read_text())
        model = qnn.QnnModel.from_json(obj)
        if args.voltage is None or args.intensity is None:
            raise InputError("--voltage and --intensity are required with --qnn-model")
        alpha, r = qnn._encode_arrays(model, [args.voltage], [args.intensity])
        states = qnn.prepare_states(model, alpha, r)
        if not args.encoded_only:
            states = qnn.evolve(model.params, states, model.cutoff, model.layer_leak_tolerance)
        state = fock.FockState(states[:, 0])
        D = model.cutoff
        source = {"qnn_model": str(args.qnn_model), "voltage": args.voltage,
                  "intensity": args.intensity, "alpha": float(alpha[0]), "r": float(r[0]),
                  "after_circuit": not args.encoded_only}
    else:
        z = args.r * np.exp(1j * args.theta)
        state = fock.prepare_displaced_squeezed(complex(args.alpha, args.alpha_imag), z, D,
                                                leak_tolerance=args.leak_tolerance)
        if args.kerr:
            state = fock.apply_kerr(state, args.kerr)
        source = {"alpha": [args.alpha, args.alpha_imag], "r": args.r, "theta": args.theta,
                  "kerr": args.kerr}
    grid = np.linspace(-args.extent, args.extent, args.points)
    W = fock.wigner(state, grid, grid)
    out = _out_dir(args)
    (out / "wigner.csv").write_text(fock.wigner_csv(grid, grid, W))
    if args.format == "svg":
        (out / "wigner.svg").write_text(fock.wigner_svg(grid, grid, W))
    j, i = np.unravel_index(int(np.argmax(W)), W.shape)
    _dump(out / "report.json", {
        "source": source, "cutoff": D, "norm": state.norm,
        "x_mean": fock.expectation(state, "x"), "p_mean": fock.expectation(state, "p"),
        "W_min": float(W.min()), "W_max": float(W.max()),
        "argmax_x": float(grid[i]), "argmax_p": float(grid[j]),
        "metadata": _metadata()})
    print(f"wigner: min {W.min():.4e}, max {W.max():.4e} at x={grid[i]:.2f}, p={grid[j]:.2f}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diodeq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="I-V CSV (voltage_V,intensity_mW_cm2,current_A)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--config", help="JSON file with hyperparameters or device constants")
        p.add_argument("--format", choices=("json", "csv", "svg"), default="json")
        return p

    common(sub.add_parser("stats", help="summary statistics of a corpus"))

    t = common(sub.add_parser("train", help="train one model on the seeded 85/15 split"))
    t.add_argument("--model", required=True, choices=sorted(TRAINERS))
    t.add_argument("--k", type=int)
    t.add_argument("--p", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--generations", type=int)

    c = common(sub.add_parser("compare", help="tabulate saved models"))
    c.add_argument("--model", dest="models", action="append", required=True,
                   help="model.json file; repeat for several")

    ph = common(sub.add_parser("physics", help="diode parameter extraction"))
    ph.add_argument("--illuminated", action="append", help="extra CSVs with illuminated sweeps")
    ph.add_argument("--transient", help="CSV time_s,current_A")
    ph.add_argument("--spectrum", help="CSV wavelength_nm,absorbance")
    ph.add_argument("--spectrum-window", type=float, nargs=2, metavar=("LO", "HI"),
                    help="1/lambda fit window in 1/nm")

    w = common(sub.add_parser("wigner", help="Wigner grid of a displaced squeezed or QNN state"),
               needs_input=False)
    w.add_argument("--alpha", type=float, default=0.0)
    w.add_argument("--alpha-imag", type=float, default=0.0)
    w.add_argument("--r", type=float, default=0.0)
    w.add_argument("--theta", type=float, default=0.0)
    w.add_argument("--kerr", type=float, default=0.0)
    w.add_argument("--cutoff", type=int, default=fock.DEFAULT_CUTOFF)
    w.add_argument("--leak-tolerance", type=float, default=1e-3)
    w.add_argument("--extent", type=float, default=5.0)
    w.add_argument("--points", type=int, default=101)
    w.add_argument("--qnn-model")
    w.add_argument("--voltage", type=float)
    w.add_argument("--intensity", type=float)
    w.add_argument("--encoded-only", action="store_true")
    return ap


COMMANDS = {"stats": cmd_stats, "train": cmd_train, "compare": cmd_compare,
            "physics": cmd_physics, "wigner": cmd_wigner}


def main(argv=None) -> int:
    level = os.environ.get("DIODEQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
