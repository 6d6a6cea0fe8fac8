import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diodeq.errors import InputError, TruncationError
from diodeq.fock import (DisplacedSqueezedParams, FockState, apply_cubic, apply_displacement,
                         apply_kerr, apply_rotation, apply_squeezing, coherent_state,
                         displacement_matrix, expectation, fock_state, kernel_distance,
                         ladder_matrices, overlap_analytic, prepare_displaced_squeezed,
                         real_gate_matrix, renormalize, squeezing_matrix, vacuum, variance, wigner,
                         wigner_csv, wigner_svg)


def fidelity(a: FockState, b: FockState) -> float:
    return abs(np.vdot(a.amplitudes, b.amplitudes))


# --------------------------------------------------------------- operators


def test_ladder_basics():
    a, ad, n, x, p = ladder_matrices(18)
    assert not (a @ vacuum().amplitudes).any()
    for k in range(18):
        e = fock_state(k).amplitudes
        np.testing.assert_allclose(ad @ a @ e, k * e, atol=1e-13)
    with pytest.raises(InputError):
        ladder_matrices(1)
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


def test_commutator_block():
    D = 18
    _, _, _, x, p = ladder_matrices(D)
    c = x @ p - p @ x
    np.testing.assert_allclose(c[:D - 1, :D - 1], 2j * np.eye(D - 1), atol=1e-12)


# ------------------------------------------------------------------- gates


def test_coherent_amplitudes():
    alpha = 0.5
    s = apply_displacement(vacuum(18), alpha)
    for k in range(11):
        ref = math.exp(-abs(alpha) ** 2 / 2) * alpha ** k / math.sqrt(math.factorial(k))
        assert abs(s.amplitudes[k] - ref) < 1e-10


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_displacement_inverse_pair(re, im):
    alpha = complex(re, im)
    if abs(alpha) > 1:
        alpha /= abs(alpha)
    s = apply_displacement(apply_displacement(vacuum(18), alpha), -alpha)
    assert 1 - fidelity(s, vacuum(18)) < 1e-9


@given(st.floats(0, 0.3), st.floats(0, 2 * math.pi))
def test_squeezing_inverse_pair(r, theta):
    z = r * np.exp(1j * theta)
    s = apply_squeezing(apply_squeezing(vacuum(18), z), -z)
    assert 1 - fidelity(s, vacuum(18)) < 1e-9


def test_squeezing_inverse_pair_beyond_envelope_needs_larger_cutoff():
    s18 = apply_squeezing(apply_squeezing(vacuum(18), 0.5), -0.5)
    s30 = apply_squeezing(apply_squeezing(vacuum(30), 0.5), -0.5)
    assert 1 - fidelity(s18, vacuum(18)) > 1e-9
    assert 1 - fidelity(s30, vacuum(30)) < 1e-9


@given(st.floats(-10, 10), st.floats(-3, 3))
def test_diagonal_gate_pairs_and_populations(phi, kappa):
    c = coherent_state(0.7 + 0.2j)
    for fwd, back in ((lambda s: apply_rotation(s, phi), lambda s: apply_rotation(s, -phi)),
                      (lambda s: apply_kerr(s, kappa), lambda s: apply_kerr(s, -kappa))):
        once = fwd(c)
        np.testing.assert_allclose(once.probabilities(), c.probabilities(), rtol=1e-14, atol=1e-300)
        assert 1 - fidelity(back(once), c) < 1e-12


def test_rotation_two_pi_identity():
    c = coherent_state(0.5)
    np.testing.assert_allclose(apply_rotation(c, 2 * math.pi).amplitudes, c.amplitudes, atol=1e-13)


def test_squeezed_variance():
    # D=18 misses 1e-6 by truncation (error about 8e-6); D=30 is inside it
    s = apply_squeezing(vacuum(30), 0.5)
    assert variance(s, "x") == pytest.approx(math.exp(-1), abs=1e-6)
    assert abs(variance(apply_squeezing(vacuum(18), 0.5), "x") - math.exp(-1)) < 1e-4


def test_real_fast_path_matches_expm():
    for t in (-0.9, 0.3, 1.0):
        np.testing.assert_allclose(real_gate_matrix("displacement", t, 18),
                                   displacement_matrix(t, 18), atol=1e-13)
        np.testing.assert_allclose(real_gate_matrix("squeezing", t * 0.8, 18),
                                   squeezing_matrix(t * 0.8, 18), atol=1e-13)


def test_leak_monotone_in_parameters():
    leaks_a = [1 - apply_displacement(vacuum(18), a, None).norm for a in np.linspace(0.5, 3, 11)]
    leaks_r = [1 - apply_squeezing(vacuum(18), r, None).norm for r in np.linspace(0.2, 1.2, 11)]
    for seq in (leaks_a, leaks_r):
        assert all(b >= a - 1e-14 for a, b in zip(seq, seq[1:]))  # rounding floor
        assert seq[-1] > seq[0]


def test_truncation_error_carries_leak():
    with pytest.raises(TruncationError) as exc:
        apply_displacement(vacuum(18), 3.0)
    assert exc.value.leak > 1e-6
    with pytest.raises(TruncationError) as exc:
        apply_cubic(vacuum(18), 0.5)
    assert exc.value.leak == pytest.approx(1.457e-4, rel=1e-2)
    small = apply_cubic(vacuum(18), 0.1)
    assert 0 <= small.leak < 1e-9


def test_norm_never_exceeds_one():
    with pytest.raises(InputError):
        FockState(np.array([1.0, 0.1]))
    s = apply_displacement(vacuum(18), 2.5, None)
    assert s.norm < 1 and s.leak > 0
    assert renormalize(s).norm == pytest.approx(1.0, abs=1e-14)


# -------------------------------------------------------------- prep / obs


def test_prepare_trivial_and_symmetry():
    assert fidelity(prepare_displaced_squeezed(0, 0), vacuum()) == pytest.approx(1.0, abs=1e-15)
    s = prepare_displaced_squeezed(0.6, 0.3)
    assert abs(expectation(s, "p")) < 1e-12


def test_encoded_state_mean():
    # D=18 truncation shifts <x> by about 1e-3; D=40 meets 1e-6
    s = prepare_displaced_squeezed(-1.0, 0.8, 40, leak_tolerance=None)
    assert expectation(s, "x") == pytest.approx(-2.0, abs=1e-6)


def test_expectations():
    v = vacuum()
    assert expectation(v, "x") == 0.0 and expectation(v, "identity") == 1.0
    c = coherent_state(0.5 + 0.3j)
    assert expectation(c, "x") == pytest.approx(1.0, abs=1e-8)
    assert expectation(c, "p") == pytest.approx(0.6, abs=1e-8)
    assert expectation(c, "n") == pytest.approx(0.34, abs=1e-8)
    with pytest.raises(InputError):
        expectation(c, "q")


# ----------------------------------------------------------------- wigner


def test_wigner_vacuum():
    x = np.arange(-6, 6.0001, 0.1)
    W = wigner(vacuum(), x, x)
    assert W.min() >= 0
    i0 = np.argmin(np.abs(x))
    assert W[i0, i0] == W.max()
    X, P = np.meshgrid(x, x)
    np.testing.assert_allclose(W, np.exp(-(X ** 2 + P ** 2) / 2) / (2 * np.pi), atol=1e-15)
    assert abs(W.sum() * 0.01 - 1) < 1e-3


def test_wigner_squeezed_marginals():
    x = np.arange(-4, 4.0001, 0.05)
    p = np.arange(-14, 14.0001, 0.1)
    W = wigner(apply_squeezing(vacuum(40), 0.8, None), x, p)
    px = W.sum(axis=0) * 0.1
    pp = W.sum(axis=1) * 0.05
    var_x = (px * x ** 2).sum() * 0.05
    var_p = (pp * p ** 2).sum() * 0.1
    assert var_x == pytest.approx(math.exp(-1.6), abs=1e-3)
    assert var_p == pytest.approx(math.exp(1.6), rel=1e-3)


def test_kerr_negativity():
    g = np.linspace(-4, 4, 60)
    W = wigner(apply_kerr(coherent_state(1.0), 1.0), g, g)
    assert W.min() < -1e-3


def test_wigner_shape_and_outputs():
    x = np.linspace(-1, 1, 3)
    p = np.linspace(-1, 1, 5)
    W = wigner(coherent_state(0.3), x, p)
    assert W.shape == (5, 3)
    csv = wigner_csv(x, p, W).splitlines()
    assert csv[0] == "x,p,W" and len(csv) == 16
    assert float(csv[1].split(",")[2]) == W[0, 0]
    svg = wigner_svg(x, p, W)
    assert svg.startswith("<svg") and svg.count("<rect") == 15


# --------------------------------------------------------------- overlap


def test_overlap_identity_and_coherent():
    a = DisplacedSqueezedParams(0.3 - 0.2j, 0.4 * np.exp(0.5j))
    assert overlap_analytic(a, a) == pytest.approx(1.0, abs=1e-14)
    assert kernel_distance(a, a) == 0.0
    c1, c2 = DisplacedSqueezedParams(0.2 + 0.1j, 0), DisplacedSqueezedParams(-0.7 + 0.4j, 0)
    assert abs(overlap_analytic(c1, c2)) ** 2 == pytest.approx(math.exp(-abs(c1.alpha - c2.alpha) ** 2),
                                                               rel=1e-13)


def test_overlap_domain_error():
    a = DisplacedSqueezedParams(0, 1.2)
    with pytest.raises(InputError):
        overlap_analytic(a, a, tanh_parametrized=True)


@pytest.mark.parametrize("seed", range(8))
def test_overlap_matches_fock_oracle(seed):
    rng = np.random.default_rng(seed)

    def draw():
        alpha = rng.uniform(0, 1) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        z = rng.uniform(0, 0.8) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        return DisplacedSqueezedParams(alpha, z)

    a, b = draw(), draw()
    sa = prepare_displaced_squeezed(a.alpha, a.z, 30, leak_tolerance=None)
    sb = prepare_displaced_squeezed(b.alpha, b.z, 30, leak_tolerance=None)
    numeric = abs(np.vdot(sa.amplitudes, sb.amplitudes)) ** 2
    assert abs(overlap_analytic(a, b)) ** 2 == pytest.approx(numeric, abs=1e-6)


def test_overlap_frozen_value():
    # frozen from the D=30 Fock inner product of the same two states
    a = DisplacedSqueezedParams(0.5, 0.3)
    b = DisplacedSqueezedParams(-0.4 + 0.2j, 0.6j)
    sa = prepare_displaced_squeezed(a.alpha, a.z, 30, leak_tolerance=None)
    sb = prepare_displaced_squeezed(b.alpha, b.z, 30, leak_tolerance=None)
    assert abs(overlap_analytic(a, b)) ** 2 == pytest.approx(abs(np.vdot(sa.amplitudes, sb.amplitudes)) ** 2,
                                                             abs=1e-7)


# ------------------------------------------------------------------ json


def test_state_json_round_trip():
    s = prepare_displaced_squeezed(0.4 - 0.1j, 0.2)
    back = FockState.from_json(json.loads(json.dumps(s.to_json())))
    assert np.array_equal(back.amplitudes, s.amplitudes)
    bad = s.to_json()
    bad["D"] = 5
    with pytest.raises(InputError):
        FockState.from_json(bad)
