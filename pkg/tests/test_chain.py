import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdcswap.chain import (ChainConfig, MaximallyCorrelatedState, SwapAmplitudes, amplitude_T, coefficient_F1234,
                           coefficient_G, detection_probability, output_state, swap_amplitudes, visibility)
from pdcswap.errors import DegeneratePostselectionError, DomainError, InvalidStateError
from pdcswap.oracle import FockGrid, oracle_visibility
from pdcswap.spectra import SourceSpectra, SpectralProfile
from pdcswap.twoqubit import partial_transpose_test, to_density_matrix
from reference import GaussianTimeFunctions, mc_coefficients

W0 = 10.0


def config(n=3, sigma=1.0, sigma_f=1.0, w0=W0, **kw):
    return ChainConfig(n, SourceSpectra.gaussian(w0, sigma, sigma_f), **kw)


def tabulated_gaussian(sigma, sigma_f, nodes=2001):
    wp = np.linspace(W0 - 14 * math.sqrt(sigma), W0 + 14 * math.sqrt(sigma), nodes)
    wf = np.linspace(W0 / 2 - 14 * math.sqrt(sigma_f), W0 / 2 + 14 * math.sqrt(sigma_f), nodes)
    pump = SpectralProfile.tabulated(wp, np.exp(-(wp - W0) ** 2 / (2 * sigma)), center=W0)
    filt = SpectralProfile.tabulated(wf, np.exp(-(wf - W0 / 2) ** 2 / (2 * sigma_f)), center=W0 / 2)
    return SourceSpectra(pump, filt)


# config -----------------------------------------------------------------------------------

def test_config_validation_and_phase_reduction():
    with pytest.raises(DomainError):
        config(n=1)
    with pytest.raises(DomainError):
        config(integration="simpson")
    c = config(phase_a=-0.5, phase_f=7.0)
    assert c.phase_a == pytest.approx(2 * math.pi - 0.5)
    assert c.phase_f == pytest.approx(7.0 - 2 * math.pi)


def test_amplitude_invariants():
    with pytest.raises(InvalidStateError):
        SwapAmplitudes(1.0, -0.1, 1.0)
    with pytest.raises(InvalidStateError):
        SwapAmplitudes(2.0, 1.0, 1.0)
    with pytest.raises(InvalidStateError):
        MaximallyCorrelatedState(0.5, 0.5, 0.6)
    with pytest.raises(InvalidStateError):
        MaximallyCorrelatedState(0.5, 0.4, 0.1)


# T amplitudes -----------------------------------------------------------------------------

def test_T2_is_index_swapped_T1():
    c = config(sigma=1.3, sigma_f=0.4)
    rng = np.random.default_rng(1)
    for _ in range(5):
        ta, tf, t1, t2, t3, t4 = rng.normal(size=6)
        assert amplitude_T(c, "T1", (ta, tf), (t1, t2, t3, t4)) == amplitude_T(c, "T2", (ta, tf), (t2, t1, t4, t3))


def test_T1_matches_hand_derived_time_functions():
    sigma, sigma_f = 1.3, 0.4
    c = config(sigma=sigma, sigma_f=sigma_f)
    ref = GaussianTimeFunctions(sigma, sigma_f)
    zero = amplitude_T(c, "T1", (0, 0), (0, 0, 0, 0))
    assert zero != 0 and np.isfinite(zero)
    assert zero == pytest.approx(2 * math.pi * ref.pump(0) ** 2 * ref.filter(0) ** 2 * ref.h_hermite(0, 0), rel=1e-12)
    rng = np.random.default_rng(2)
    times = rng.normal(size=(10, 6))
    got = amplitude_T(c, "T1", times[:, :2].T, times[:, 2:].T)
    np.testing.assert_allclose(np.abs(got), np.abs(ref.T(*times.T)), rtol=1e-12)


def test_T1_decays_in_t3():
    c = config(sigma=1.0, sigma_f=0.3)
    near = abs(amplitude_T(c, "T1", (0, 0), (0, 0, 0, 0)))
    far = abs(amplitude_T(c, "T1", (0, 0), (0, 0, 10 / math.sqrt(0.3), 0)))
    assert far < 1e-3 * near


def test_amplitude_T_requires_three_sources():
    with pytest.raises(DomainError):
        amplitude_T(config(n=2), "T1", (0, 0), (0, 0, 0, 0))
    with pytest.raises(DomainError):
        amplitude_T(config(), "T3", (0, 0), (0, 0, 0, 0))


# coefficients -----------------------------------------------------------------------------

def test_coefficients_against_monte_carlo():
    c = config(sigma=1.0, sigma_f=1.0)
    est = mc_coefficients(1.0, 1.0, samples=10**7)
    exact = {"F1234": coefficient_F1234(c), "G1234": coefficient_G(c, "1234"), "G2143": coefficient_G(c, "2143")}
    for name, value in exact.items():
        assert est[name].agrees_with(value, n_sigma=3), (name, value, est[name])
        assert est[name].relative_error < 1e-3


def test_coefficient_symmetries():
    for sigma, sigma_f in [(1, 1), (0.5, 3), (4, 0.05)]:
        c = config(sigma=sigma, sigma_f=sigma_f)
        F = coefficient_F1234(c)
        G1, G2 = coefficient_G(c, "1234"), coefficient_G(c, 2143)
        assert F >= 0 and G1 > 0
        assert G1 == pytest.approx(G2, rel=1e-12)
        assert F <= math.sqrt(G1 * G2) * (1 + 1e-12)


def test_coefficients_scale_with_frequency_rescaling():
    # w -> lam w, t -> t/lam, (sigma, sigma_f) -> lam^2 (sigma, sigma_f):
    # every time function picks up lam, h picks up lam^2, T picks up lam^6;
    # |T|^2 gives lam^12 and the six time integrals lam^-6
    lam = 2.0
    base = config(sigma=1.3, sigma_f=0.4)
    scaled = config(sigma=1.3 * lam**2, sigma_f=0.4 * lam**2, w0=W0 * lam)
    assert coefficient_F1234(scaled) / coefficient_F1234(base) == pytest.approx(lam**6, rel=1e-12)
    assert coefficient_G(scaled) / coefficient_G(base) == pytest.approx(lam**6, rel=1e-12)
    assert visibility(swap_amplitudes(scaled)) == pytest.approx(visibility(swap_amplitudes(base)), rel=1e-12)


def test_swap_amplitudes_reduce_to_three_source_coefficients():
    for sigma, sigma_f in [(1, 1), (0.5, 3), (2, 0.5), (4, 0.05)]:
        c = config(sigma=sigma, sigma_f=sigma_f)
        amps = swap_amplitudes(c)
        assert amps.b == pytest.approx(coefficient_G(c, "1234"), rel=1e-12)
        assert amps.c == pytest.approx(coefficient_G(c, "2143"), rel=1e-12)
        assert amps.r_a == pytest.approx(coefficient_F1234(c), rel=1e-12)
        assert visibility(amps) == pytest.approx(
            2 * coefficient_F1234(c) / (coefficient_G(c, "1234") + coefficient_G(c, "2143")), rel=1e-12)


def test_two_source_visibility_matches_oracle():
    c = config(n=2, sigma=1.0, sigma_f=0.3)
    amps = swap_amplitudes(c)
    v = visibility(amps)
    assert np.isfinite(amps.r_a) and 0 < v <= 1
    assert v == pytest.approx(math.sqrt(1.0 / 1.3), rel=1e-12)
    assert oracle_visibility(c, FockGrid.for_spectra(c.spectra, 32)) == pytest.approx(v, rel=0.01)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_identical_sources_give_equal_weights(n):
    amps = swap_amplitudes(config(n=n, sigma=1.7, sigma_f=0.6))
    assert amps.b == pytest.approx(amps.c, rel=1e-10)


def test_three_source_reference_value():
    assert visibility(swap_amplitudes(config(sigma=1, sigma_f=1))) == pytest.approx(math.sqrt(0.4), rel=1e-12)


# output state and visibility --------------------------------------------------------------

def test_output_state_examples():
    s = output_state(SwapAmplitudes(1, 1, 1))
    assert (s.p00, s.p11, s.r) == (0.5, 0.5, 0.5)
    assert output_state(SwapAmplitudes(0, 1, 1)).r == 0
    s = output_state(SwapAmplitudes(0.4 * np.exp(1j * math.pi / 3), 0.5, 0.5))
    assert s.r == pytest.approx(0.4) and s.theta == pytest.approx(math.pi / 3)
    with pytest.raises(DegeneratePostselectionError):
        output_state(SwapAmplitudes(0, 0, 0))
    with pytest.raises(DegeneratePostselectionError):
        visibility(SwapAmplitudes(0, 0, 0))


def test_visibility_examples():
    assert visibility(SwapAmplitudes(0.5, 0.5, 0.5)) == 1.0


def test_narrow_filters_give_high_visibility():
    c = config(sigma=1.0, sigma_f=0.1)
    v = visibility(swap_amplitudes(c))
    assert v >= 0.95
    est = mc_coefficients(1.0, 0.1, samples=4 * 10**6, seed=7)
    v_mc = 2 * est["F1234"].value.real / (est["G1234"].value.real + est["G2143"].value.real)
    rel = math.sqrt(sum(e.relative_error**2 for e in est.values()))
    assert abs(v_mc - v) <= 3 * rel * v


@pytest.mark.parametrize("sigma, sigma_f", [(1, 1), (1, 0.1), (2, 0.5), (0.5, 3)])
def test_longer_chain_is_less_visible(sigma, sigma_f):
    v2 = visibility(swap_amplitudes(config(n=2, sigma=sigma, sigma_f=sigma_f)))
    v3 = visibility(swap_amplitudes(config(n=3, sigma=sigma, sigma_f=sigma_f)))
    assert v3 <= v2


# detection probability ---------------------------------------------------------------------

def test_detection_fringe_recovers_visibility():
    amps = SwapAmplitudes(0.3 * np.exp(0.7j), 0.45, 0.55)
    phases = np.linspace(0, 2 * math.pi, 2001)
    P = np.array([detection_probability(amps, x, 0.0) for x in phases])
    assert (P.max() - P.min()) / (P.max() + P.min()) == pytest.approx(visibility(amps), rel=1e-6)
    assert detection_probability(amps, -0.7, 0.0) == pytest.approx(amps.b + amps.c + 2 * amps.r_a)


def test_detection_without_coherence_is_flat():
    amps = SwapAmplitudes(0, 0.4, 0.6)
    assert {detection_probability(amps, x, y) for x, y in [(0, 0), (1, 2), (3, 0.5)]} == {1.0}


@st.composite
def amplitudes(draw):
    b = draw(st.floats(1e-3, 10))
    c = draw(st.floats(1e-3, 10))
    r = draw(st.floats(0, 1)) * math.sqrt(b * c)
    return SwapAmplitudes(r * np.exp(1j * draw(st.floats(-math.pi, math.pi))), b, c)


@settings(max_examples=100, deadline=None)
@given(amplitudes(), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_detection_probability_nonnegative(amps, x, y):
    assert detection_probability(amps, x, y) >= -1e-12 * (amps.b + amps.c)


# quadrature path --------------------------------------------------------------------------

@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("sigma_f", [0.05, 0.2, 1.0, 3.0])
def test_quadrature_agrees_with_analytic(sigma, sigma_f):
    c = config(sigma=sigma, sigma_f=sigma_f)
    exact = visibility(swap_amplitudes(c))
    quad = swap_amplitudes(c.with_(integration="quadrature"))
    assert abs(visibility(quad) - exact) <= max(3 * quad.error, 1e-12)


def test_tabulated_spectra_use_quadrature():
    src = tabulated_gaussian(1.0, 0.3)
    with pytest.raises(DomainError):
        swap_amplitudes(ChainConfig(3, src))
    exact = visibility(swap_amplitudes(config(sigma=1.0, sigma_f=0.3)))
    for n in (2, 3):
        quad = swap_amplitudes(ChainConfig(n, src, integration="quadrature"))
        ref = visibility(swap_amplitudes(config(n=n, sigma=1.0, sigma_f=0.3)))
        assert visibility(quad) == pytest.approx(ref, rel=1e-4)
    c = ChainConfig(3, src, integration="quadrature")
    assert 2 * coefficient_F1234(c) / (2 * coefficient_G(c)) == pytest.approx(exact, rel=1e-4)


# properties -------------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_visibility_bounded_and_state_physical(n, sigma, sigma_f):
    amps = swap_amplitudes(config(n=n, sigma=sigma, sigma_f=sigma_f))
    v = visibility(amps)
    assert 0 <= v <= 1
    state = to_density_matrix(output_state(amps))
    assert state.eigenvalues().min() >= -1e-10
    lowest, entangled = partial_transpose_test(state)
    assert lowest == pytest.approx(-v / 2, abs=1e-12)
    assert entangled == (v > 1e-9)
