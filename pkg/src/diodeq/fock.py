r"""Single-mode continuous-variable simulator in a truncated Fock basis.

Quadratures use the :math:`\hbar = 2` convention, :math:`\hat x = \hat a + \hat a^\dagger`,
:math:`\hat p = i(\hat a^\dagger - \hat a)`, so the vacuum has unit variance in both.

Gate matrices are the cutoff-sized blocks of the exact (untruncated) operators.
They are computed by exponentiating the generator in a larger working space
and cropping, so a state pushed towards the cutoff genuinely loses norm. That
loss is reported rather than hidden by renormalisation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from .errors import InputError, TruncationError

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 18
LEAK_TOLERANCE = 1e-6


def work_dim(D: int) -> int:
    return max(2 * D, D + 40)


@lru_cache(maxsize=None)
def ladder_matrices(D: int):
    """``(a, a_dag, n, x, p)`` as read-only D x D complex matrices."""
    if D < 2:
        raise InputError(f"cutoff must be at least 2, got {D}")
    a = np.diag(np.sqrt(np.arange(1, D, dtype=float)), 1).astype(complex)
    ad = a.conj().T.copy()
    n = np.diag(np.arange(D, dtype=float)).astype(complex)
    x = a + ad
    p = 1j * (ad - a)
    for m in (a, ad, n, x, p):
        m.setflags(write=False)
    return a, ad, n, x, p


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray
    leak: float = 0.0  # norm lost by the gate that produced this state

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        if amps.size < 2:
            raise InputError("cutoff must be at least 2")
        norm = float(np.vdot(amps, amps).real)
        if norm > 1 + 1e-9:
            raise InputError(f"state norm {norm} exceeds 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_json(self) -> dict:
        return {"D": self.cutoff,
                "amplitudes": [[float(c.real), float(c.imag)] for c in self.amplitudes]}

    @classmethod
    def from_json(cls, obj: dict) -> "FockState":
        amps = np.array([complex(r, i) for r, i in obj["amplitudes"]])
        if len(amps) != obj["D"]:
            raise InputError("amplitude count does not match D")
        return cls(amps)


def vacuum(D: int = DEFAULT_CUTOFF) -> FockState:
    v = np.zeros(D, dtype=complex)
    v[0] = 1.0
    return FockState(v)


def fock_state(n: int, D: int = DEFAULT_CUTOFF) -> FockState:
    v = np.zeros(D, dtype=complex)
    v[n] = 1.0
    return FockState(v)


def renormalize(state: FockState) -> FockState:
    log.info("renormalising state with norm %.3e", state.norm)
    return FockState(state.amplitudes / math.sqrt(state.norm))


# ----------------------------------------------------------- gate matrices


def _cropped_expm(generator_fn, D: int) -> np.ndarray:
    W = work_dim(D)
    a = np.diag(np.sqrt(np.arange(1, W, dtype=float)), 1).astype(complex)
    return expm(generator_fn(a, a.conj().T))[:D, :D]


def displacement_matrix(alpha: complex, D: int) -> np.ndarray:
    return _cropped_expm(lambda a, ad: alpha * ad - np.conj(alpha) * a, D)


def squeezing_matrix(z: complex, D: int) -> np.ndarray:
    return _cropped_expm(lambda a, ad: 0.5 * (np.conj(z) * (a @ a) - z * (ad @ ad)), D)


def cubic_phase_matrix(gamma: float, D: int) -> np.ndarray:
    def gen(a, ad):
        x = a + ad
        return 1j * gamma / 6.0 * (x @ x @ x)
    return _cropped_expm(gen, D)


def rotation_phases(phi: float, D: int) -> np.ndarray:
    return np.exp(1j * phi * np.arange(D))


def kerr_phases(kappa: float, D: int) -> np.ndarray:
    n = np.arange(D, dtype=float)
    return np.exp(1j * kappa * n * n)


@lru_cache(maxsize=None)
def _real_generator_eigs(kind: str, D: int):
    """Eigendecomposition of i*G for the real-parameter displacement/squeezing generators."""
    W = work_dim(D)
    a = np.diag(np.sqrt(np.arange(1, W, dtype=float)), 1)
    G = (a.T - a) if kind == "displacement" else 0.5 * (a @ a - a.T @ a.T)
    lam, V = np.linalg.eigh(1j * G)
    top = V[:D]
    top.setflags(write=False)
    lam.setflags(write=False)
    return lam, top


def real_gate_matrix(kind: str, t: float, D: int) -> np.ndarray:
    """D(t) for real t (``kind='displacement'``) or S(t) for real t (``'squeezing'``).

    Uses a cached eigendecomposition of the generator: exp(t G) = V exp(-i t L) V^H.
    """
    lam, top = _real_generator_eigs(kind, D)
    return (top * np.exp(-1j * t * lam)) @ top.conj().T


# ------------------------------------------------------------------ gates


def _apply_matrix(state: FockState, M: np.ndarray, leak_tolerance, what: str) -> FockState:
    out = M @ state.amplitudes
    new_norm = float(np.vdot(out, out).real)
    leak = state.norm - new_norm
    if leak_tolerance is not None and leak > leak_tolerance:
        raise TruncationError(
            f"{what} leaked {leak:.3e} of the norm at cutoff {state.cutoff} "
            f"(tolerance {leak_tolerance:.1e})", leak=leak)
    return FockState(out, leak=leak)


def apply_displacement(state: FockState, alpha: complex,
                       leak_tolerance: float | None = LEAK_TOLERANCE) -> FockState:
    return _apply_matrix(state, displacement_matrix(alpha, state.cutoff), leak_tolerance,
                         f"D({alpha})")


def apply_squeezing(state: FockState, z: complex,
                    leak_tolerance: float | None = LEAK_TOLERANCE) -> FockState:
    return _apply_matrix(state, squeezing_matrix(z, state.cutoff), leak_tolerance, f"S({z})")


def apply_cubic(state: FockState, gamma: float,
                leak_tolerance: float | None = LEAK_TOLERANCE) -> FockState:
    return _apply_matrix(state, cubic_phase_matrix(gamma, state.cutoff), leak_tolerance,
                         f"V({gamma})")


def apply_rotation(state: FockState, phi: float) -> FockState:
    return FockState(rotation_phases(phi, state.cutoff) * state.amplitudes)


def apply_kerr(state: FockState, kappa: float) -> FockState:
    return FockState(kerr_phases(kappa, state.cutoff) * state.amplitudes)


def prepare_displaced_squeezed(alpha: complex, z: complex, D: int = DEFAULT_CUTOFF,
                               leak_tolerance: float | None = LEAK_TOLERANCE) -> FockState:
    """D(alpha) S(z) |0>."""
    s = apply_squeezing(vacuum(D), z, leak_tolerance)
    return apply_displacement(s, alpha, leak_tolerance)


def coherent_state(alpha: complex, D: int = DEFAULT_CUTOFF) -> FockState:
    return prepare_displaced_squeezed(alpha, 0.0, D, leak_tolerance=None)


# ---------------------------------------------------------- measurements


OBSERVABLES = ("x", "p", "n", "identity")


def expectation(state: FockState, observable: str) -> float:
    if observable not in OBSERVABLES:
        raise InputError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    psi = state.amplitudes
    if observable == "identity":
        return float(np.vdot(psi, psi).real)
    _, _, n, x, p = ladder_matrices(state.cutoff)
    op = {"x": x, "p": p, "n": n}[observable]
    return float(np.vdot(psi, op @ psi).real)


def variance(state: FockState, observable: str) -> float:
    _, _, n, x, p = ladder_matrices(state.cutoff)
    op = {"x": x, "p": p, "n": n}[observable]
    psi = state.amplitudes
    mean = np.vdot(psi, op @ psi).real
    return float(np.vdot(psi, op @ (op @ psi)).real - mean ** 2)


def _displacement_elements(beta: np.ndarray, D: int) -> np.ndarray:
    """<n|D(beta)|m> for all n, m < D; ``beta`` of any shape, result shape beta.shape + (D, D)."""
    beta = np.asarray(beta, dtype=complex)
    r2 = np.abs(beta) ** 2
    env = np.exp(-0.5 * r2)
    out = np.empty(beta.shape + (D, D), dtype=complex)
    lf = gammaln(np.arange(D) + 1.0)
    for n in range(D):
        for m in range(D):
            if n >= m:
                coef = np.exp(0.5 * (lf[m] - lf[n]))
                val = coef * beta ** (n - m) * eval_genlaguerre(m, n - m, r2)
            else:
                coef = np.exp(0.5 * (lf[n] - lf[m]))
                val = coef * (-np.conj(beta)) ** (m - n) * eval_genlaguerre(n, m - n, r2)
            out[..., n, m] = val * env
    return out


def wigner(state: FockState, xvec, pvec) -> np.ndarray:
    """Wigner function on the grid, shape ``(len(pvec), len(xvec))``.

    Evaluated as the displaced-parity expectation
    ``W(x, p) = <psi| D(beta) P |psi> / (2 pi)`` with ``beta = x + i p``, using
    closed-form Fock matrix elements of the displacement, so no further
    truncation is involved.
    """
    xvec = np.asarray(xvec, dtype=float)
    pvec = np.asarray(pvec, dtype=float)
    X, P = np.meshgrid(xvec, pvec)
    D = state.cutoff
    c = state.amplitudes
    parity = (-1.0) ** np.arange(D)
    elems = _displacement_elements(X + 1j * P, D)
    val = np.einsum("n,...nm,m->...", np.conj(c), elems, parity * c)
    return val.real / (2 * np.pi)


# -------------------------------------------------- analytic overlap kernel


@dataclass(frozen=True)
class DisplacedSqueezedParams:
    alpha: complex
    z: complex  # r * exp(i theta), same convention as the squeezing gate

    @property
    def r(self) -> float:
        return abs(self.z)


def _tanh_convention(z: complex) -> complex:
    r = abs(z)
    return 0j if r == 0 else complex(np.exp(1j * np.angle(z)) * np.tanh(r))


def overlap_analytic(a: DisplacedSqueezedParams, b: DisplacedSqueezedParams,
                     tanh_parametrized: bool = False) -> complex:
    """Closed-form <alpha1, z1 | alpha2, z2> between displaced squeezed states.

    The formula takes squeezing as ``e^{i theta} tanh r``; gate-convention
    parameters are mapped onto it unless ``tanh_parametrized`` is set.
    """
    a1, a2 = complex(a.alpha), complex(b.alpha)
    z1 = complex(a.z) if tanh_parametrized else _tanh_convention(a.z)
    z2 = complex(b.z) if tanh_parametrized else _tanh_convention(b.z)
    if abs(z1) >= 1 or abs(z2) >= 1:
        raise InputError("|z| must be < 1 in the tanh convention")
    c1 = np.conj
    den = 1 - z2 * c1(z1)
    pref = ((1 - abs(z2) ** 2) * (1 - abs(z1) ** 2) / den ** 2) ** 0.25
    expo = ((a2 + z2 * c1(a2)) * (c1(a2) + c1(z1) * a2)
            - 2 * (a2 + z2 * c1(a2)) * (c1(a1) + c1(z1) * a1)
            + (a1 + z2 * c1(a1)) * (c1(a1) + c1(z1) * a1))
    return complex(pref * np.exp(-expo / (2 * den)))


def kernel_distance(a: DisplacedSqueezedParams, b: DisplacedSqueezedParams) -> float:
    ov = abs(overlap_analytic(a, b)) ** 2
    return math.sqrt(max(0.0, 2.0 * (1.0 - ov)))


# ---------------------------------------------------------------- output


def wigner_csv(xvec, pvec, W) -> str:
    """Long-format ``x,p,W`` rows, x varying fastest."""
    lines = ["x,p,W"]
    for j, p in enumerate(pvec):
        for i, x in enumerate(xvec):
            lines.append(f"{float(x)!r},{float(p)!r},{float(W[j, i])!r}")
    return "\n".join(lines) + "\n"


def wigner_svg(xvec, pvec, W, cell: int = 6) -> str:
    """Heatmap with a diverging palette centred on zero (red negative, blue positive)."""
    W = np.asarray(W, dtype=float)
    ny, nx = W.shape
    scale = float(np.max(np.abs(W))) or 1.0
    rects = []
    for j in range(ny):
        y = (ny - 1 - j) * cell  # p increases upwards
        for i in range(nx):
            v = W[j, i] / scale
            fade = int(round(255 * (1 - min(abs(v), 1.0))))
            color = f"rgb(255,{fade},{fade})" if v < 0 else f"rgb({fade},{fade},255)"
            rects.append(f'<rect x="{i * cell}" y="{y}" width="{cell}" height="{cell}" fill="{color}"/>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell}" height="{ny * cell}">'
            f'<title>Wigner function, x in [{xvec[0]:g}, {xvec[-1]:g}], p in [{pvec[0]:g}, {pvec[-1]:g}]</title>'
            + "".join(rects) + "</svg>\n")
