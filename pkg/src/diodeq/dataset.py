"""I-V-illumination datasets: loading, statistics, scaling, splitting, synthesis."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    InputError,
    ParseError,
    ScaleDegenerateError,
    SchemaError,
)

CSV_HEADER = ("voltage_V", "intensity_mW_cm2", "current_A")
COLUMNS = ("voltage", "intensity", "current")
SCALER_KINDS = ("iqr-robust", "standard", "min-max")


@dataclass(frozen=True)
class IVSample:
    voltage: float
    intensity: float
    current: float

    def __post_init__(self):
        vals = (self.voltage, self.intensity, self.current)
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"non-finite sample {vals}")
        if self.intensity < 0:
            raise InputError(f"negative intensity {self.intensity}")


class IVDataset:
    """Ordered, immutable collection of (voltage, intensity, current) rows.

    Data are held column-wise in read-only float64 arrays.
    """

    def __init__(self, voltage, intensity, current, provenance: str = ""):
        cols = [np.array(c, dtype=np.float64).reshape(-1) for c in (voltage, intensity, current)]
        if not (len(cols[0]) == len(cols[1]) == len(cols[2])):
            raise InputError("column lengths differ")
        for c in cols:
            if not np.all(np.isfinite(c)):
                raise InputError("dataset contains non-finite values")
            c.setflags(write=False)
        if np.any(cols[1] < 0):
            raise InputError("intensity must be non-negative")
        self.voltage, self.intensity, self.current = cols
        self.provenance = provenance

    @classmethod
    def from_samples(cls, samples: Iterable[IVSample], provenance: str = "") -> "IVDataset":
        rows = [(s.voltage, s.intensity, s.current) for s in samples]
        arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], provenance)

    def __len__(self):
        return len(self.voltage)

    def __repr__(self):
        return f"IVDataset(n={len(self)}, provenance={self.provenance!r})"

    @property
    def samples(self) -> list[IVSample]:
        return [IVSample(float(v), float(p), float(i))
                for v, p, i in zip(self.voltage, self.intensity, self.current)]

    @property
    def features(self) -> np.ndarray:
        """(n, 2) matrix of voltage and intensity."""
        return np.column_stack([self.voltage, self.intensity])

    @property
    def targets(self) -> np.ndarray:
        return np.array(self.current)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise InputError(f"unknown column {name!r}")
        return getattr(self, name)

    def subset(self, indices: Sequence[int], provenance: str | None = None) -> "IVDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return IVDataset(self.voltage[idx], self.intensity[idx], self.current[idx],
                         self.provenance if provenance is None else provenance)


def load_csv(path) -> IVDataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if tuple(header) != CSV_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        rows = []
        for rowno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise SchemaError(f"{path}: row {rowno} has {len(row)} columns, expected 3")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"{path}: non-numeric value at row {rowno}: {row}", row=rowno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}: non-finite value at row {rowno}", row=rowno)
            if vals[1] < 0:
                raise ParseError(f"{path}: negative intensity at row {rowno}", row=rowno)
            rows.append(vals)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    arr = np.array(rows)
    return IVDataset(arr[:, 0], arr[:, 1], arr[:, 2], provenance=str(path))


def save_csv(ds: IVDataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for v, p, i in zip(ds.voltage, ds.intensity, ds.current):
            w.writerow([repr(float(v)), repr(float(p)), repr(float(i))])


def _quantile_sorted(xs: np.ndarray, q: float) -> float:
    # type-7: h = (n-1)q, linear between neighbouring order statistics
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def summary_stats(ds: IVDataset) -> dict[str, dict[str, float]]:
    """Per-column count, mean, sample std, min, quartiles and max."""
    if len(ds) == 0:
        raise EmptyDatasetError("summary of empty dataset")
    out = {}
    for name in COLUMNS:
        col = ds.column(name)
        xs = np.sort(col)
        n = len(xs)
        out[name] = {
            "count": n,
            "mean": float(np.mean(col)),
            "std": float(np.std(col, ddof=1)) if n > 1 else 0.0,
            "min": float(xs[0]),
            "25%": _quantile_sorted(xs, 0.25),
            "50%": _quantile_sorted(xs, 0.50),
            "75%": _quantile_sorted(xs, 0.75),
            "max": float(xs[-1]),
        }
    return out


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature affine scaling ``x' = lo + (x - location) / scale``."""

    kind: str
    location: tuple[float, ...]
    scale: tuple[float, ...]
    bounds: tuple[float, float] = (0.0, 1.0)
    degenerate: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in SCALER_KINDS:
            raise InputError(f"unknown scaler kind {self.kind!r}")
        if len(self.location) != len(self.scale):
            raise InputError("location/scale length mismatch")
        if any(not (s > 0) for s in self.scale):
            raise ScaleDegenerateError("scale must be strictly positive")

    @property
    def offset(self) -> float:
        return self.bounds[0] if self.kind == "min-max" else 0.0

    def to_json(self) -> dict:
        return {"kind": self.kind, "location": list(self.location), "scale": list(self.scale),
                "bounds": list(self.bounds), "degenerate": list(self.degenerate)}

    @classmethod
    def from_json(cls, obj: dict) -> "ScalerParams":
        return cls(kind=obj["kind"], location=tuple(obj["location"]), scale=tuple(obj["scale"]),
                   bounds=tuple(obj.get("bounds", (0.0, 1.0))),
                   degenerate=tuple(obj.get("degenerate", ())))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def fit_scaler(data, kind: str = "iqr-robust", bounds=(0.0, 1.0)) -> ScalerParams:
    """Fit a scaler on an IVDataset's features or on a plain (n, d) matrix."""
    X = data.features if isinstance(data, IVDataset) else np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyDatasetError("cannot fit scaler on empty data")
    if kind not in SCALER_KINDS:
        raise InputError(f"unknown scaler kind {kind!r}")
    lo, hi = float(bounds[0]), float(bounds[1])
    loc, scale, degenerate = [], [], []
    for j in range(X.shape[1]):
        xs = np.sort(X[:, j])
        if kind == "iqr-robust":
            l = _quantile_sorted(xs, 0.5)
            s = _quantile_sorted(xs, 0.75) - _quantile_sorted(xs, 0.25)
        elif kind == "standard":
            l = float(np.mean(xs))
            s = float(np.std(xs, ddof=0))
            if not s > 0:
                raise ScaleDegenerateError(f"feature {j} is constant; standard scaling undefined")
        else:
            if not hi > lo:
                raise InputError("min-max bounds must satisfy lo < hi")
            l = float(xs[0])
            s = (float(xs[-1]) - l) / (hi - lo)
        bad = not s > 0
        if bad:
            warnings.warn(f"feature {j} has zero spread under {kind}; using scale 1", RuntimeWarning)
            s = 1.0
        loc.append(float(l))
        scale.append(float(s))
        degenerate.append(bad)
    return ScalerParams(kind, tuple(loc), tuple(scale),
                        (lo, hi) if kind == "min-max" else (0.0, 1.0), tuple(degenerate))


def apply_scaler(params: ScalerParams, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    return (X - np.asarray(params.location)) / np.asarray(params.scale) + params.offset


def invert_scaler(params: ScalerParams, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    return (X - params.offset) * np.asarray(params.scale) + np.asarray(params.location)


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation split; the test part holds floor(n * fraction) rows."""
    if not 0.0 < test_fraction < 1.0:
        raise InputError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(math.floor(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split_train_test(ds: IVDataset, test_fraction: float = 0.15,
                     seed: int = 42) -> tuple[IVDataset, IVDataset]:
    train_idx, test_idx = split_indices(len(ds), test_fraction, seed)
    return (ds.subset(train_idx, f"{ds.provenance}[train]"),
            ds.subset(test_idx, f"{ds.provenance}[test]"))


def kfold_indices(n_samples: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """k disjoint validation folds covering range(n_samples); sizes differ by at most one."""
    if k < 2:
        raise InputError(f"k must be at least 2, got {k}")
    if k > n_samples:
        raise InputError(f"k={k} exceeds number of samples {n_samples}")
    perm = np.random.default_rng(seed).permutation(n_samples)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass(frozen=True)
class SyntheticDiodeParams:
    n: float = 3.0
    I0: float = 1e-9
    Rs: float = 0.0
    T: float = 300.0
    photo_coeff: float = 0.0
    gamma: float = 1.4

    def __post_init__(self):
        if not (self.n > 1 and self.I0 > 0 and self.Rs >= 0 and self.T > 0
                and self.photo_coeff >= 0 and self.gamma > 0):
            raise InputError(f"invalid synthetic diode parameters {self}")


def synthesize_diode(params: SyntheticDiodeParams, voltages, intensities,
                     provenance: str = "synthetic") -> IVDataset:
    """Dark thermionic current plus a reverse-directed photocurrent ``photo_coeff * P**gamma``.

    Every (voltage, intensity) pair produces one row; the inputs are broadcast
    against each other.
    """
    from .physics import thermionic_current

    V, P = np.broadcast_arrays(np.asarray(voltages, dtype=np.float64),
                               np.asarray(intensities, dtype=np.float64))
    V, P = V.ravel(), P.ravel()
    if np.any(P < 0):
        raise InputError("intensity must be non-negative")
    dark = thermionic_current(V, params.n, params.I0, params.Rs, params.T)
    current = dark - params.photo_coeff * np.power(P, params.gamma)
    return IVDataset(V, P, current, provenance)


def synthetic_corpus(n_voltages: int = 50, intensities=(0.0, 20.0, 50.0, 80.0),
                     params: SyntheticDiodeParams | None = None, v_range=(-3.5, 3.4)) -> IVDataset:
    """Grid corpus shaped like the measured one: voltage sweeps at several intensities."""
    params = params or SyntheticDiodeParams(n=4.0, I0=2e-6, Rs=3000.0, photo_coeff=2e-6, gamma=1.0)
    V = np.linspace(v_range[0], v_range[1], n_voltages)
    VV, PP = np.meshgrid(V, np.asarray(intensities, dtype=float), indexing="ij")
    return synthesize_diode(params, VV.T.ravel(), PP.T.ravel(), provenance="synthetic-corpus")
