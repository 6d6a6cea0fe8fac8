"""Schottky-diode parameter extraction and photodetector figures of merit.

Units follow device-physics habit rather than SI everywhere: areas in cm²,
Richardson constant in A/(cm²K²), optical power density in W/cm², current
density in A/cm², barrier heights and field-lowering coefficients in eV.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ExtractionError, InputError, SolverError


@dataclass(frozen=True)
class PhysicalConstants:
    q: float = 1.602176634e-19
    k_B: float = 1.380649e-23
    h: float = 6.62607015e-34
    c: float = 2.99792458e8
    eps0: float = 8.8541878128e-12


CONST = PhysicalConstants()
Q = CONST.q
K_B = CONST.k_B
HC_EV_NM = CONST.h * CONST.c / CONST.q * 1e9  # 1239.84 eV nm

# Not reported for the measured device; override per run.
DEFAULT_AREA_CM2 = 0.01
DEFAULT_RICHARDSON = 32.0  # p-Si, A/(cm^2 K^2)
DEFAULT_THICKNESS_M = 150e-9
DEFAULT_PERMITTIVITY = 2.89


def thermal_voltage(T: float = 300.0) -> float:
    return K_B * T / Q


# ---------------------------------------------------------------- thermionic


def _te_raw(u, n, I0, vt):
    return I0 * np.exp(u / (n * vt)) * (-np.expm1(-u / vt))


def _te_deriv(u, n, I0, vt):
    # d/du of I0 (exp(u/(n vt)) - exp(u (1/n - 1)/vt))
    a = 1.0 / (n * vt)
    b = (1.0 / n - 1.0) / vt
    return I0 * (a * math.exp(a * u) - b * math.exp(b * u))


def _solve_scalar(V, n, I0, Rs, vt, max_iter=100):
    if V == 0.0:
        return 0.0
    fV = float(_te_raw(V, n, I0, vt))
    if V > 0:
        lo, hi = 0.0, min(fV, V / Rs)
    else:
        lo, hi = max(fV, V / Rs), 0.0
    g = lambda I: I - float(_te_raw(V - I * Rs, n, I0, vt))
    I = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gi = g(I)
        scale = max(abs(I), I0)
        if abs(gi) <= 1e-15 * scale:
            return I
        if gi > 0:
            hi = I
        else:
            lo = I
        if hi - lo <= 4 * np.spacing(max(abs(lo), abs(hi))):
            return I
        dg = 1.0 + Rs * _te_deriv(V - I * Rs, n, I0, vt)
        if abs(gi / dg) <= 4 * np.spacing(abs(I)):
            return I  # correction below the rounding floor of the residual
        step = I - gi / dg
        if not (lo < step < hi) or not math.isfinite(step):
            step = 0.5 * (lo + hi)  # damping: fall back to bisection
        I = step
    raise SolverError(f"thermionic solve did not converge at V={V}", voltage=V)


def thermionic_current(V, n: float, I0: float, Rs: float = 0.0, T: float = 300.0):
    """Thermionic-emission diode current with series resistance.

    Solves ``I = I0 exp(q(V - I Rs)/(n k T)) [1 - exp(-q(V - I Rs)/(k T))]``
    by safeguarded Newton iteration. ``V`` may be a scalar or an array.
    """
    if not (n > 0 and I0 > 0 and Rs >= 0 and T > 0):
        raise InputError("thermionic_current needs n > 0, I0 > 0, Rs >= 0, T > 0")
    vt = thermal_voltage(T)
    Varr = np.asarray(V, dtype=np.float64)
    if Rs == 0.0:
        out = _te_raw(Varr, n, I0, vt)
    else:
        out = np.array([_solve_scalar(float(v), n, I0, Rs, vt) for v in Varr.ravel()])
        out = out.reshape(Varr.shape)
    return float(out) if np.ndim(V) == 0 else out


# ------------------------------------------------------------------ fits


@dataclass
class DiodeFitResult:
    n: float
    I0: float
    phi_b0: float | None = None
    Rs: float | None = None
    window: tuple[float, float] = (0.0, 0.15)
    residual_rms: float = 0.0
    T: float = 300.0

    def current(self, V):
        return thermionic_current(V, self.n, self.I0, self.Rs or 0.0, self.T)


def _linfit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def ideality_factor(V, I, window=(0.0, 0.15), T: float = 300.0,
                    bracket: bool = True) -> DiodeFitResult:
    """Ideality factor and saturation current from the low-bias forward branch.

    With ``bracket`` set, the fitted quantity is ``ln(I / (1 - exp(-qV/kT)))``,
    which is exactly linear in V for the thermionic law at negligible series
    resistance; otherwise plain ``ln I`` is fitted.
    """
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    lo, hi = window
    sel = (V > max(lo, 0.0)) & (V <= hi)
    if sel.sum() < 3:
        raise ExtractionError(f"fewer than 3 forward samples in window {window}")
    if np.any(I[sel] <= 0):
        raise ExtractionError("non-positive current inside the ideality window")
    vt = thermal_voltage(T)
    y = np.log(I[sel])
    if bracket:
        y = y - np.log(-np.expm1(-V[sel] / vt))
    slope, intercept, ssr = _linfit(V[sel], y)
    if not slope > 0:
        raise ExtractionError("degenerate ln I vs V fit (non-positive slope)")
    n = 1.0 / (vt * slope)
    return DiodeFitResult(n=n, I0=math.exp(intercept), window=(float(lo), float(hi)),
                          residual_rms=math.sqrt(ssr / sel.sum()), T=T)


def barrier_height(I0: float, area: float = DEFAULT_AREA_CM2,
                   richardson: float = DEFAULT_RICHARDSON, T: float = 300.0) -> float:
    """Zero-bias barrier height in eV."""
    if not (I0 > 0 and area > 0 and richardson > 0 and T > 0):
        raise InputError("barrier_height needs positive I0, area, richardson, T")
    return thermal_voltage(T) * math.log(area * richardson * T * T / I0)


@dataclass
class NordeResult:
    Rs: float
    phi_b: float
    gamma: int
    V_min: float
    I_min: float
    interior: bool


def norde_series_resistance(V, I, n: float, T: float = 300.0, area: float = DEFAULT_AREA_CM2,
                            richardson: float = DEFAULT_RICHARDSON,
                            gamma: int | None = None) -> NordeResult:
    """Series resistance and barrier height from the minimum of the Norde function.

    ``F(V) = V/gamma - (kT/q) ln(I / (A A* T^2))``. By default gamma is the
    smallest integer at least one above ``n``: Rs scales with ``gamma - n``,
    so a margin below one would amplify any error in ``n``. When F decreases
    over the whole branch the minimum sits at the last sample; the returned
    Rs is then an upper bound and ``interior`` is False.
    """
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    sel = (V > 0) & (I > 0)
    if sel.sum() < 3:
        raise ExtractionError("Norde analysis needs at least 3 forward samples with I > 0")
    order = np.argsort(V[sel], kind="stable")
    v, i = V[sel][order], I[sel][order]
    vt = thermal_voltage(T)
    if gamma is None:
        gamma = int(math.floor(n)) + 2
    elif not gamma > n:
        raise InputError(f"gamma must exceed n={n}, got {gamma}")
    F = v / gamma - vt * np.log(i / (area * richardson * T * T))
    k = int(np.argmin(F))
    if k == 0:
        raise ExtractionError("Norde function has no interior minimum (increasing from the first sample)")
    interior = k < len(v) - 1
    v_min, lnI_min, F_min = v[k], math.log(i[k]), F[k]
    if interior:
        # parabola through the three samples around the discrete minimum
        xs, fs = v[k - 1:k + 2], F[k - 1:k + 2]
        c2, c1, c0 = np.polyfit(xs, fs, 2)
        if c2 > 0:
            vv = -c1 / (2 * c2)
            if xs[0] <= vv <= xs[2]:
                v_min = vv
                F_min = c0 + c1 * vv + c2 * vv * vv
                lnI_min = np.interp(vv, xs, np.log(i[k - 1:k + 2]))
    I_min = math.exp(lnI_min)
    Rs = vt * (gamma - n) / I_min
    phi_b = F_min + v_min / gamma - vt
    return NordeResult(Rs=float(Rs), phi_b=float(phi_b), gamma=gamma, V_min=float(v_min),
                       I_min=float(I_min), interior=bool(interior))


def refine_diode(V, I, window=(0.0, 0.15), T: float = 300.0, area: float = DEFAULT_AREA_CM2,
                 richardson: float = DEFAULT_RICHARDSON, iterations: int = 20,
                 rtol: float = 1e-9) -> tuple[DiodeFitResult, NordeResult]:
    """Alternate the window fit on the junction voltage ``V - I Rs`` with the
    Norde estimate of Rs until both settle.

    The plain window fit absorbs the ``I Rs`` drop into ``n``; removing it and
    re-running Norde converges in a few rounds when the minimum is interior.
    """
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    fit = ideality_factor(V, I, window, T)
    nd = norde_series_resistance(V, I, fit.n, T, area, richardson)
    for _ in range(iterations):
        if not nd.interior:
            break
        new_fit = ideality_factor(V - I * nd.Rs, I, window, T)
        new_nd = norde_series_resistance(V, I, new_fit.n, T, area, richardson)
        done = (abs(new_fit.n - fit.n) <= rtol * fit.n
                and abs(new_nd.Rs - nd.Rs) <= rtol * max(nd.Rs, 1e-300))
        fit, nd = new_fit, new_nd
        if done:
            break
    fit.Rs = nd.Rs
    fit.phi_b0 = barrier_height(fit.I0, area, richardson, T)
    return fit, nd


# --------------------------------------------------------------- transport


def _two_segment(x, y, min_points=3):
    """Exhaustive breakpoint scan minimising the summed residuals of two line fits."""
    n = len(x)
    if n < 2 * min_points:
        raise ExtractionError(f"need at least {2 * min_points} points for a two-segment fit")
    best = None
    for b in range(min_points, n - min_points + 1):
        s1, c1, r1 = _linfit(x[:b], y[:b])
        s2, c2, r2 = _linfit(x[b:], y[b:])
        if best is None or r1 + r2 < best[0]:
            best = (r1 + r2, b, (s1, c1), (s2, c2))
    return best


def _label_forward(slope: float) -> str:
    if abs(slope - 1.0) <= 0.25:
        return "ohmic"
    if slope > 1.9:
        return "sclc"
    return "intermediate"


@dataclass
class TransportAnalysis:
    forward_slopes: list[float] = field(default_factory=list)
    forward_breakpoint_V: float | None = None
    forward_labels: list[str] = field(default_factory=list)
    degenerate: bool = False
    reverse_beta_exp: list[float] = field(default_factory=list)
    reverse_breakpoint_V: float | None = None
    beta_theory_pf: float | None = None
    beta_theory_schottky: float | None = None
    reverse_labels: list[str] = field(default_factory=list)


def transport_regions(V, I, min_points: int = 3, slope_tol: float = 1e-3) -> TransportAnalysis:
    """Two-region power-law analysis of the forward branch (ln I vs ln V)."""
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    sel = (V > 0) & (I > 0)
    order = np.argsort(V[sel], kind="stable")
    x, y = np.log(V[sel][order]), np.log(I[sel][order])
    if len(x) < 2 * min_points:
        raise ExtractionError("too few forward points for transport regions")
    single, _, _ = _linfit(x, y)
    _, b, (s1, _), (s2, _) = _two_segment(x, y, min_points)
    out = TransportAnalysis()
    if abs(s1 - s2) <= slope_tol * max(1.0, abs(single)):
        out.forward_slopes = [single]
        out.degenerate = True
    else:
        out.forward_slopes = [s1, s2]
        out.forward_breakpoint_V = float(math.exp(x[b]))
    out.forward_labels = [_label_forward(s) for s in out.forward_slopes]
    return out


def beta_theory(permittivity: float = DEFAULT_PERMITTIVITY, b: float = 1.0) -> float:
    """Field-lowering coefficient in eV m^0.5 V^-0.5 (b=1 Poole-Frenkel, b=4 Schottky)."""
    if not (permittivity > 0 and b > 0):
        raise InputError("permittivity and b must be positive")
    beta_joule = math.sqrt(CONST.q ** 3 / (b * math.pi * permittivity * CONST.eps0))
    return beta_joule / CONST.q


def field_emission_beta(V, I, permittivity: float = DEFAULT_PERMITTIVITY,
                        thickness: float = DEFAULT_THICKNESS_M, T: float = 300.0,
                        regions: int = 2, min_points: int = 3,
                        analysis: TransportAnalysis | None = None) -> TransportAnalysis:
    """Experimental beta from ln|I_R| vs E^0.5 on the reverse branch, classified
    by the nearer of the Poole-Frenkel and Schottky theoretical values."""
    if not thickness > 0:
        raise InputError("electrode spacing must be positive")
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    sel = (V < 0) & (I != 0)
    E = np.abs(V[sel]) / thickness
    order = np.argsort(E, kind="stable")
    x, y = np.sqrt(E[order]), np.log(np.abs(I[sel][order]))
    vt = thermal_voltage(T)
    out = analysis if analysis is not None else TransportAnalysis()
    out.beta_theory_pf = beta_theory(permittivity, 1.0)
    out.beta_theory_schottky = beta_theory(permittivity, 4.0)
    if regions == 1:
        if len(x) < min_points:
            raise ExtractionError("too few reverse points")
        slope, _, _ = _linfit(x, y)
        slopes = [slope]
    else:
        _, b, (s1, _), (s2, _) = _two_segment(x, y, min_points)
        slopes = [s1, s2]
        out.reverse_breakpoint_V = float(-(x[b] ** 2) * thickness)
    betas = [s * vt for s in slopes]
    if any(not (bb > 0) for bb in betas):
        raise ExtractionError("degenerate reverse fit (non-positive slope)")
    out.reverse_beta_exp = betas
    out.reverse_labels = [
        "poole-frenkel" if abs(bb - out.beta_theory_pf) <= abs(bb - out.beta_theory_schottky)
        else "schottky" for bb in betas]
    return out


# -------------------------------------------------------- figures of merit


@dataclass
class FiguresOfMerit:
    R: float
    D_star: float
    EQE: float
    I_N: float
    NEP: float
    area: float
    wavelength: float
    J_dark: float
    J_ph: float
    detectivity_defined: bool = True


def figures_of_merit(J_ph: float, J_dark: float, P: float, wavelength: float,
                     area: float = DEFAULT_AREA_CM2) -> FiguresOfMerit:
    """Responsivity (A/W), specific detectivity (Jones), EQE (%), noise current
    (A/Hz^0.5) and NEP (W/Hz^0.5).

    ``J_ph``/``J_dark`` in A/cm², ``P`` in W/cm², ``wavelength`` in metres.
    A zero dark current leaves D*, I_N and NEP undefined (NaN, flagged).
    """
    if not P > 0:
        raise InputError("optical power density must be positive")
    if J_dark < 0:
        raise InputError("dark current density must be non-negative")
    if not (wavelength > 0 and area > 0):
        raise InputError("wavelength and area must be positive")
    J_ph = abs(J_ph)
    R = J_ph / P
    eqe = CONST.h * CONST.c / (wavelength * CONST.q) * R * 100.0
    if J_dark == 0:
        nan = float("nan")
        return FiguresOfMerit(R, nan, eqe, nan, nan, area, wavelength, J_dark, J_ph, False)
    d_star = R / math.sqrt(2 * CONST.q * J_dark)
    i_n = R * math.sqrt(area) / d_star if d_star > 0 else math.sqrt(2 * CONST.q * J_dark * area)
    nep = i_n / R if R > 0 else float("inf")
    return FiguresOfMerit(R, d_star, eqe, i_n, nep, area, wavelength, J_dark, J_ph, True)


# ------------------------------------------------------------- transients


@dataclass
class TransientMetrics:
    rise_time: float
    fall_time: float
    on_off_ratio: float
    residual_off: float
    cycles: int
    rise_times: list[float] = field(default_factory=list)
    fall_times: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)


def _crossing(t, s, i0, i1, level):
    # linear interpolation of the level crossing between samples i0 and i1
    if s[i1] == s[i0]:
        return float(t[i1])
    frac = (level - s[i0]) / (s[i1] - s[i0])
    return float(t[i0] + frac * (t[i1] - t[i0]))


def transient_metrics(t, current, use_magnitude: bool = True) -> TransientMetrics:
    """10-90 % rise, 90-10 % fall, ON/OFF ratio from a square-wave photocurrent trace.

    Segments are delimited by crossings of the mid level; each segment's
    plateau is the median of its second half, which ignores the tail of the
    following transition as long as that is shorter than a quarter segment.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(current, dtype=float)
    if use_magnitude:
        s = np.abs(s)
    if len(t) != len(s) or len(t) < 4:
        raise InputError("time and current must be equal-length with at least 4 samples")
    mid = 0.5 * (s.min() + s.max())
    high = s > mid
    edges = np.flatnonzero(high[1:] != high[:-1]) + 1  # first index of each new segment
    if len(edges) < 2:
        raise ExtractionError("no complete ON/OFF cycle found")
    bounds = np.concatenate([[0], edges, [len(s)]])

    def plateau(k):
        a, b = bounds[k], bounds[k + 1]
        return float(np.median(s[a + (b - a) // 2:b]))

    # edge segments cut short by the record boundary hold no usable plateau
    lengths = np.diff(bounds)
    full = np.median(lengths[1:-1]) if len(lengths) > 2 else max(lengths)
    first = 1 if lengths[0] >= 0.5 * full else 2
    last = len(bounds) - 1 if lengths[-1] >= 0.5 * full else len(bounds) - 2
    rises, falls, ratios, offs = [], [], [], []
    for k in range(first, last):
        prev_level, next_level = plateau(k - 1), plateau(k)
        e = bounds[k]
        lo, hi = min(prev_level, next_level), max(prev_level, next_level)
        l10, l90 = lo + 0.1 * (hi - lo), lo + 0.9 * (hi - lo)
        rising = high[e]
        if rising:
            j = e - 1
            while j > bounds[k - 1] and s[j] > l10:
                j -= 1
            t_start = _crossing(t, s, j, j + 1, l10) if s[j] <= l10 else float(t[j])
            m = e
            while m < bounds[k + 1] - 1 and s[m] < l90:
                m += 1
            t_end = _crossing(t, s, m - 1, m, l90) if s[m] >= l90 and s[m - 1] < l90 else float(t[m])
            rises.append(t_end - t_start)
            offs.append(prev_level)
            ratios.append(next_level / prev_level if prev_level > 0 else float("inf"))
        else:
            j = e - 1
            while j > bounds[k - 1] and s[j] < l90:
                j -= 1
            t_start = _crossing(t, s, j, j + 1, l90) if s[j] >= l90 else float(t[j])
            m = e
            while m < bounds[k + 1] - 1 and s[m] > l10:
                m += 1
            t_end = _crossing(t, s, m - 1, m, l10) if s[m] <= l10 and s[m - 1] > l10 else float(t[m])
            falls.append(t_end - t_start)
            offs.append(next_level)
    if not rises or not falls:
        raise ExtractionError("no complete ON/OFF cycle found")
    return TransientMetrics(
        rise_time=float(np.mean(rises)), fall_time=float(np.mean(falls)),
        on_off_ratio=float(np.mean(ratios)), residual_off=float(np.mean(offs)),
        cycles=min(len(rises), len(falls)), rise_times=rises, fall_times=falls, ratios=ratios)


# ------------------------------------------------------------------- ASF


@dataclass
class BandGapResult:
    E_g: float
    lambda_g_nm: float
    slope: float
    intercept: float


def asf_band_gap(wavelength_nm, absorbance, window) -> BandGapResult:
    """Band gap from the linear region of sqrt(Abs/lambda) against 1/lambda."""
    lam = np.asarray(wavelength_nm, dtype=float)
    ab = np.asarray(absorbance, dtype=float)
    lo, hi = min(window), max(window)
    sel = (lam >= lo) & (lam <= hi) & (ab > 0)
    if sel.sum() < 3:
        raise ExtractionError(f"fewer than 3 positive-absorbance points in window {window}")
    x = 1.0 / lam[sel]
    y = np.sqrt(ab[sel] / lam[sel])
    slope, intercept, _ = _linfit(x, y)
    if slope == 0 or not math.isfinite(slope):
        raise ExtractionError("non-positive x-intercept (zero slope)")
    x0 = -intercept / slope
    if not x0 > 0:
        raise ExtractionError(f"non-positive x-intercept {x0}")
    lam_g = 1.0 / x0
    return BandGapResult(E_g=HC_EV_NM / lam_g, lambda_g_nm=lam_g, slope=slope, intercept=intercept)


# --------------------------------------------------------- report chain


@dataclass
class DeviceConfig:
    T: float = 300.0
    area: float = DEFAULT_AREA_CM2
    richardson: float = DEFAULT_RICHARDSON
    permittivity: float = DEFAULT_PERMITTIVITY
    thickness: float = DEFAULT_THICKNESS_M
    wavelength: float = 365e-9
    ideality_window: tuple[float, float] = (0.0, 0.15)
    merit_bias: float = -3.0

    @classmethod
    def from_json(cls, obj: dict) -> "DeviceConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        if "ideality_window" in known:
            known["ideality_window"] = tuple(known["ideality_window"])
        return cls(**known)


def _interp_at(V, I, v0):
    order = np.argsort(V, kind="stable")
    return float(np.interp(v0, V[order], I[order]))


def _run(stage, fn, report):
    try:
        return fn()
    except Exception as exc:  # every stage failure is recorded, never fatal
        report["failures"][stage] = f"{type(exc).__name__}: {exc}"
        return None


def extract_report(dark, illuminated: dict | None = None, config: DeviceConfig | None = None,
                   transient: tuple | None = None, spectrum: tuple | None = None,
                   spectrum_window=None) -> dict:
    """Run the whole extraction chain and collect a JSON-ready report.

    ``dark`` and each value of ``illuminated`` are ``(V, I)`` pairs; the keys of
    ``illuminated`` are intensities in mW/cm².
    """
    cfg = config or DeviceConfig()
    illuminated = illuminated or {}
    report: dict = {"config": asdict(cfg), "conditions": {}, "failures": {}, "skipped": []}
    conditions = [("dark", 0.0, dark)] + [
        (f"{p:g} mW/cm2", float(p), iv) for p, iv in sorted(illuminated.items())]
    for name, p, (V, I) in conditions:
        V = np.asarray(V, dtype=float)
        I = np.asarray(I, dtype=float)
        entry: dict = {"intensity_mW_cm2": p}
        fit = _run(f"{name}/ideality", lambda: ideality_factor(V, I, cfg.ideality_window, cfg.T), report)
        if fit is not None:
            entry["n"] = fit.n
            entry["I0"] = fit.I0
            phi = _run(f"{name}/barrier",
                       lambda: barrier_height(fit.I0, cfg.area, cfg.richardson, cfg.T), report)
            entry["phi_b0_eV"] = phi
            ref = _run(f"{name}/norde", lambda: refine_diode(
                V, I, cfg.ideality_window, cfg.T, cfg.area, cfg.richardson), report)
            if ref is not None:
                rfit, nd = ref
                entry["Rs_ohm"] = nd.Rs
                entry["norde_phi_b_eV"] = nd.phi_b
                entry["norde_interior_minimum"] = nd.interior
                entry["n_refined"] = rfit.n
                entry["I0_refined"] = rfit.I0
        tr = _run(f"{name}/transport", lambda: transport_regions(V, I), report)
        tr = _run(f"{name}/beta", lambda: field_emission_beta(
            V, I, cfg.permittivity, cfg.thickness, cfg.T, analysis=tr), report) or tr
        if tr is not None:
            entry["transport"] = asdict(tr)
        report["conditions"][name] = entry

    if illuminated:
        Vd, Id = (np.asarray(a, dtype=float) for a in dark)
        merits = {}
        for p, (V, I) in sorted(illuminated.items()):
            def fom(V=V, I=I, p=p):
                i_dark = _interp_at(Vd, Id, cfg.merit_bias)
                i_light = _interp_at(np.asarray(V, float), np.asarray(I, float), cfg.merit_bias)
                return asdict(figures_of_merit(
                    (i_light - i_dark) / cfg.area, abs(i_dark) / cfg.area,
                    p * 1e-3, cfg.wavelength, cfg.area))
            merits[f"{p:g} mW/cm2"] = _run(f"{p:g}/merit", fom, report)
        report["figures_of_merit"] = merits
    else:
        report["skipped"].append("figures_of_merit")
    if transient is not None:
        tm = _run("transient", lambda: transient_metrics(*transient), report)
        report["transient"] = asdict(tm) if tm is not None else None
    else:
        report["skipped"].append("transient")
    if spectrum is not None and spectrum_window is not None:
        bg = _run("band_gap", lambda: asf_band_gap(spectrum[0], spectrum[1], spectrum_window), report)
        report["band_gap"] = asdict(bg) if bg is not None else None
    else:
        report["skipped"].append("band_gap")
    return report


def figure_tables(dark, illuminated: dict | None = None,
                  config: DeviceConfig | None = None) -> dict[str, list[tuple]]:
    """Data behind the log-log, reverse-field and merit-vs-bias plots as row tuples."""
    cfg = config or DeviceConfig()
    illuminated = illuminated or {}
    tables: dict[str, list[tuple]] = {"forward_lnV_lnI": [], "reverse_sqrtV_lnI": []}
    for p, (V, I) in [(0.0, dark)] + sorted(illuminated.items()):
        V = np.asarray(V, dtype=float)
        I = np.asarray(I, dtype=float)
        for v, i in zip(V, I):
            if v > 0 and i > 0:
                tables["forward_lnV_lnI"].append((p, math.log(v), math.log(i)))
            if v < 0 and i != 0:
                tables["reverse_sqrtV_lnI"].append((p, math.sqrt(-v), math.log(abs(i))))
    if illuminated:
        Vd, Id = (np.asarray(a, dtype=float) for a in dark)
        rows = []
        for p, (V, I) in sorted(illuminated.items()):
            V = np.asarray(V, dtype=float)
            I = np.asarray(I, dtype=float)
            for v, i in zip(V, I):
                i_dark = _interp_at(Vd, Id, v)
                if i_dark == 0:
                    continue
                f = figures_of_merit((i - i_dark) / cfg.area, abs(i_dark) / cfg.area,
                                     p * 1e-3, cfg.wavelength, cfg.area)
                rows.append((p, v, f.R, f.D_star, f.EQE, f.I_N))
        tables["merit_vs_V"] = rows
    return tables


TABLE_HEADERS = {
    "forward_lnV_lnI": ("intensity_mW_cm2", "ln_V", "ln_I"),
    "reverse_sqrtV_lnI": ("intensity_mW_cm2", "sqrt_V_R", "ln_abs_I_R"),
    "merit_vs_V": ("intensity_mW_cm2", "voltage_V", "R_A_W", "D_star_Jones", "EQE_pct", "I_N_A"),
}


def group_by_intensity(V: Sequence[float], P: Sequence[float], I: Sequence[float]):
    """Split flat columns into ``{intensity: (V, I)}`` keyed by distinct intensity."""
    V, P, I = (np.asarray(a, dtype=float) for a in (V, P, I))
    out = {}
    for p in np.unique(P):
        m = P == p
        out[float(p)] = (V[m], I[m])
    return out
