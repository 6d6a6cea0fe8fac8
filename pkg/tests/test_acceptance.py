"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Criterion 9 needs the original 828-row measurement corpus. Point
``DIODEQ_CORPUS`` at that CSV to evaluate it; without it the row fails.
"""
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE, write_csv

from diodeq import qnn
from diodeq.cli import main
from diodeq.dataset import (SyntheticDiodeParams, load_csv, summary_stats, synthesize_diode,
                            synthetic_corpus)
from diodeq.fock import (DisplacedSqueezedParams, apply_displacement, apply_kerr, apply_squeezing,
                         coherent_state, overlap_analytic, prepare_displaced_squeezed, variance,
                         vacuum, wigner)
from diodeq.mlp import LayerWeights, backward, forward
from diodeq.physics import (beta_theory, figures_of_merit, ideality_factor,
                            norde_series_resistance)
from diodeq.pipeline import GpConfig, enumerate_depth1, evaluate, gp_search


def record(number, title, checks, started, budget):
    """Log the criterion line and fail the test if any check failed."""
    elapsed = time.perf_counter() - started
    ok = all(passed for passed, _ in checks.values())
    detail = "; ".join(f"{k}: {d}" for k, (_, d) in checks.items())
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title} "
                      f"[{elapsed:.1f} s, budget {budget}] {detail}")
    bad = [k for k, (passed, _) in checks.items() if not passed]
    assert not bad, f"criterion {number} failed: {bad}"


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


# ---------------------------------------------------------------- physics


def test_criterion_01_beta_constants():
    t0 = time.perf_counter()
    pf, sc = beta_theory(2.89, 1.0), beta_theory(2.89, 4.0)
    record(1, "field-lowering coefficients", {
        "beta_PF": (within(pf, 4.46e-5, 0.01), f"{pf:.4e}"),
        "beta_Sc": (within(sc, 2.23e-5, 0.01), f"{sc:.4e}"),
    }, t0, "instant")


def test_criterion_02_eqe():
    t0 = time.perf_counter()
    eqe = figures_of_merit(0.019, 1e-9, 1.0, 194e-9).EQE
    record(2, "EQE consistency", {
        "EQE": (within(eqe, 11.85, 0.05) and round(eqe, 1) == 12.1, f"{eqe:.3f} %"),
    }, t0, "instant")


def test_criterion_03_diode_round_trip():
    t0 = time.perf_counter()
    V = np.concatenate([np.linspace(0.002, 0.15, 75), np.linspace(0.16, 6, 600)])
    ds = synthesize_diode(SyntheticDiodeParams(n=3.0, I0=1e-9, Rs=1000.0, T=300.0), V, 0.0)
    fit = ideality_factor(ds.voltage, ds.current)
    nd = norde_series_resistance(ds.voltage, ds.current, fit.n)
    record(3, "diode round trip", {
        "n": (within(fit.n, 3.0, 0.02), f"{fit.n:.5f}"),
        "Rs": (within(nd.Rs, 1000.0, 0.10), f"{nd.Rs:.2f} ohm"),
        "time": (time.perf_counter() - t0 < 1.0, "< 1 s"),
    }, t0, "1 s")


# -------------------------------------------------------------------- mlp


def _flat(ws):
    return np.concatenate([np.concatenate([l.w.ravel(), l.b]) for l in ws])


def _unflat(vec, like):
    out, i = [], 0
    for l in like:
        nw, nb = l.w.size, l.b.size
        out.append(LayerWeights(vec[i:i + nw].reshape(l.w.shape), vec[i + nw:i + nw + nb].copy()))
        i += nw + nb
    return out


def test_criterion_04_mlp_gradients():
    t0 = time.perf_counter()
    worst = 0.0
    for draw in range(20):
        rng = np.random.default_rng(5000 + draw)
        sizes = (2, *rng.integers(2, 8, size=rng.integers(1, 4)), 1)
        w = [LayerWeights(rng.normal(size=(sizes[i + 1], sizes[i])), rng.normal(size=sizes[i + 1]))
             for i in range(len(sizes) - 1)]
        X = rng.normal(size=(int(rng.integers(1, 9)), 2))
        Y = rng.normal(size=len(X))
        g = _flat(backward(w, X, Y)[1])
        theta = _flat(w)
        fd = np.empty_like(theta)
        for i in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += 1e-6
            tm[i] -= 1e-6
            fd[i] = (np.mean((forward(_unflat(tp, w), X)[0] - Y) ** 2)
                     - np.mean((forward(_unflat(tm, w), X)[0] - Y) ** 2)) / 2e-6
        # relative error, with an absolute floor for components near zero
        rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-3)
        worst = max(worst, float(rel.max()))
    record(4, "MLP gradient suite", {
        "max relative error": (worst < 1e-5, f"{worst:.2e} over 20 nets"),
        "time": (time.perf_counter() - t0 < 10, "< 10 s"),
    }, t0, "10 s")


# ------------------------------------------------------------------- fock


def test_criterion_05_fock_oracles():
    t0 = time.perf_counter()
    checks = {}

    amp_err = 0.0
    for alpha in (0.5, 1.0 - 0.5j):
        s = coherent_state(alpha)
        for k in range(11):
            ref = math.exp(-abs(alpha) ** 2 / 2) * alpha ** k / math.sqrt(math.factorial(k))
            amp_err = max(amp_err, abs(s.amplitudes[k] - ref))
    checks["coherent amplitudes"] = (amp_err < 1e-10, f"{amp_err:.1e}")

    # D=18 misses this by truncation; see the decisions ledger
    var30 = variance(apply_squeezing(vacuum(30), 0.5), "x")
    var18 = variance(apply_squeezing(vacuum(18), 0.5), "x")
    checks["Var(x) r=0.5"] = (abs(var30 - math.exp(-1)) < 1e-6,
                              f"D=30 err {abs(var30 - math.exp(-1)):.1e} (D=18 err {abs(var18 - math.exp(-1)):.1e})")

    worst = 0.0
    for a in (0.3, -0.7j, 0.6 + 0.8j, 1.0):
        back = apply_displacement(apply_displacement(vacuum(18), a), -a)
        worst = max(worst, 1 - abs(back.amplitudes[0]))
    for r in (0.1, 0.3 * np.exp(1j), 0.3):
        back = apply_squeezing(apply_squeezing(vacuum(18), r), -r)
        worst = max(worst, 1 - abs(back.amplitudes[0]))
    checks["inverse pairs D=18 |alpha|<=1 r<=0.3"] = (worst < 1e-9, f"{worst:.1e}")

    x = np.arange(-6, 6.0001, 0.1)
    norm = wigner(vacuum(), x, x).sum() * 0.01
    checks["Wigner vacuum norm"] = (abs(norm - 1) < 1e-3, f"{norm:.6f}")

    a = DisplacedSqueezedParams(0.3 - 0.2j, 0.4 * np.exp(0.5j))
    c1, c2 = DisplacedSqueezedParams(0.2 + 0.1j, 0), DisplacedSqueezedParams(-0.7 + 0.4j, 0)
    mapping_ok = (abs(overlap_analytic(a, a) - 1) < 1e-14 and
                  abs(abs(overlap_analytic(c1, c2)) ** 2 - math.exp(-abs(c1.alpha - c2.alpha) ** 2)) < 1e-14)
    checks["z-convention mapping"] = (mapping_ok, "self overlap and coherent limit")
    rng = np.random.default_rng(20)
    ov_err = 0.0
    for _ in range(10):
        pa, pb = [DisplacedSqueezedParams(rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform()),
                                          rng.uniform(0, 0.8) * np.exp(2j * np.pi * rng.uniform()))
                  for _ in range(2)]
        sa = prepare_displaced_squeezed(pa.alpha, pa.z, 30, leak_tolerance=None)
        sb = prepare_displaced_squeezed(pb.alpha, pb.z, 30, leak_tolerance=None)
        num = abs(np.vdot(sa.amplitudes, sb.amplitudes)) ** 2
        ov_err = max(ov_err, abs(abs(overlap_analytic(pa, pb)) ** 2 - num))
    checks["analytic overlap vs D=30"] = (ov_err < 1e-6, f"{ov_err:.1e}")
    checks["time"] = (time.perf_counter() - t0 < 30, "< 30 s")
    record(5, "Fock-simulator oracles", checks, t0, "30 s")


def test_criterion_06_kerr_negativity():
    t0 = time.perf_counter()
    g = np.linspace(-4, 4, 81)
    wmin = float(wigner(apply_kerr(coherent_state(1.0), 1.0), g, g).min())
    record(6, "Kerr negativity", {"W_min": (wmin < -1e-3, f"{wmin:.4e}")}, t0, "5 s")


# -------------------------------------------------------------------- qnn


@pytest.mark.slow
def test_criterion_07_qnn_training():
    t0 = time.perf_counter()
    corpus = synthetic_corpus()
    model = qnn.init_model(corpus, seed=1)
    assert model.n_layers == 8 and model.cutoff == 18 and model.target_scale == 1e3
    # lr inside the allowed range; 0.005 dips the trace to 0.989 early on
    res = qnn.train(model, corpus, epochs=100, batch_size=32, lr=0.002, seed=2, workers=4)
    ratio = res.history[-1][1] / res.history[0][1]
    min_trace = min(h[3] for h in res.history)
    xs, _ = qnn.run_circuit(res.model.params, qnn.prepare_states(res.model, np.zeros(1), np.zeros(1)),
                            res.model.cutoff)
    near_zero = abs(float(xs[0])) / float(np.max(np.abs(corpus.current * 1e3)))
    record(7, "QNN desk-scale training", {
        "samples": (len(corpus) == 200, f"{len(corpus)}"),
        "loss ratio": (ratio <= 0.01, f"{ratio:.4f} after 100 epochs"),
        "min trace": (min_trace > 0.99, f"{min_trace:.4f}"),
        "vacuum output": (near_zero < 0.1, f"{near_zero:.3f} of max |target|"),
        "time": (time.perf_counter() - t0 < 600, "< 10 min"),
    }, t0, "10 min")


# --------------------------------------------------------------------- gp


@pytest.mark.slow
def test_criterion_08_gp_search():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0, 1, 60), rng.uniform(0, 100, 60)])
    y = np.where(X[:, 0] > 0.5, 1.0, 0.0)
    res = gp_search(GpConfig(generations=50, seed=1, workers=4), X, y)
    bests = [h[1] for h in res.history]
    monotone = all(b <= a for a, b in zip(bests, bests[1:]))
    kinds = ("iqr-scaler", "knn-regressor", "gbt-regressor")
    table = {str(t): evaluate(t, X, y, 5, 1) for t in enumerate_depth1(kinds)}
    best_knn = min(v for k, v in table.items() if k.startswith("knn"))
    best_gbt = min(v for k, v in table.items() if k.startswith("gbt"))
    record(8, "GP search", {
        "elitism": (monotone and len(res.history) == 51, f"{len(res.history) - 1} generations"),
        "winner": ("gbt" in str(res.best), str(res.best)),
        "depth-1 enumeration": (best_gbt < best_knn, f"gbt {best_gbt:.3g} < knn {best_knn:.3g}"),
        "time": (time.perf_counter() - t0 < 300, "< 5 min"),
    }, t0, "5 min")


# ------------------------------------------------------------- conditional

PUBLISHED_STATS = {  # printed values and the decimals they are printed to
    "voltage": {"mean": (-0.05, 2), "std": (2.018, 3), "min": (-3.5, 1), "max": (3.4, 1),
                "25%": (-1.8, 1), "50%": (-0.075, 3), "75%": (1.7, 1)},
    "intensity": {"mean": (41.7, 1), "std": (26.9, 1), "min": (0.0, 0), "max": (80.0, 1),
                  "25%": (20.0, 1), "50%": (42.5, 1), "75%": (65.0, 0)},
}


def test_criterion_09_original_corpus(tmp_path):
    t0 = time.perf_counter()
    path = os.environ.get("DIODEQ_CORPUS")
    if not path or not Path(path).exists():
        record(9, "original-corpus reproduction", {
            "corpus": (False, "original 828-row corpus not available (set DIODEQ_CORPUS)")}, t0, "n/a")
    stats = summary_stats(load_csv(path))
    checks = {"rows": (stats["voltage"]["count"] == 828, str(stats["voltage"]["count"]))}
    for col, rows in PUBLISHED_STATS.items():
        misses = [k for k, (v, d) in rows.items() if round(stats[col][k], d) != round(v, d)]
        checks[f"{col} stats"] = (not misses, f"mismatched {misses}" if misses else "as printed")
    out = tmp_path / "knn"
    assert main(["train", "--model", "knn", "--input", path, "--out", str(out)]) == 0
    test_mse = json.loads((out / "report.json").read_text())["report"]["test_mse"]
    checks["KNN test MSE"] = (abs(math.log10(test_mse / 2.67e-11)) <= 1, f"{test_mse:.3e}")
    record(9, "original-corpus reproduction", checks, t0, "n/a")


# ------------------------------------------------------------ determinism


def _snapshot(out: Path) -> dict:
    snap = {}
    for f in sorted(out.iterdir()):
        if f.suffix == ".json":
            obj = json.loads(f.read_text())
            obj.pop("metadata", None)
            snap[f.name] = json.dumps(obj, sort_keys=True)
        else:
            snap[f.name] = f.read_bytes()
    return snap


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    V = np.linspace(-3, 3, 12)
    p = SyntheticDiodeParams(n=2.5, I0=1e-9, Rs=1000.0, photo_coeff=1e-8)
    rows = [(v, P, i) for P in (0.0, 20.0, 50.0, 80.0)
            for v, i in zip(V, synthesize_diode(p, V, P).current)]
    iv = str(write_csv(tmp_path / "iv.csv", rows))
    Vd = np.concatenate([-np.linspace(5, 0.1, 30), np.linspace(0.002, 0.15, 60), np.linspace(0.16, 5, 200)])
    dark = synthesize_diode(SyntheticDiodeParams(n=3.0, I0=1e-9, Rs=1000.0), Vd, 0.0)
    dark_csv = str(write_csv(tmp_path / "dark.csv", [(v, 0.0, i) for v, i in zip(dark.voltage, dark.current)]))

    runs = {
        "stats": ["stats", "--input", iv],
        "train knn": ["train", "--model", "knn", "--input", iv],
        "train mlp": ["train", "--model", "mlp", "--epochs", "5", "--input", iv],
        "train fig5": ["train", "--model", "fig5", "--input", iv],
        "train gp": ["train", "--model", "gp", "--generations", "2", "--input", iv],
        "train qnn": ["train", "--model", "qnn", "--epochs", "1", "--input", iv],
        "physics": ["physics", "--input", dark_csv],
        "wigner": ["wigner", "--alpha", "-1", "--r", "0.8", "--points", "41", "--format", "svg"],
    }
    checks = {}
    for name, argv in runs.items():
        snaps = []
        for rep in range(2):
            out = tmp_path / f"{name.replace(' ', '_')}_{rep}"
            code = main([*argv, "--out", str(out), "--seed", "11"])
            snaps.append((code, _snapshot(out)))
        checks[name] = (snaps[0][0] == 0 and snaps[0] == snaps[1], f"exit {snaps[0][0]}")
    model = str(tmp_path / "train_knn_0" / "model.json")
    snaps = []
    for rep in range(2):
        out = tmp_path / f"compare_{rep}"
        code = main(["compare", "--input", iv, "--model", model, "--out", str(out)])
        snaps.append((code, _snapshot(out)))
    checks["compare"] = (snaps[0][0] == 0 and snaps[0] == snaps[1], f"exit {snaps[0][0]}")
    checks["time"] = (time.perf_counter() - t0 < 60, "< 1 min")
    record(10, "CLI determinism", checks, t0, "1 min")
