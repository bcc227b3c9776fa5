import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdcswap.chain import ChainConfig, swap_amplitudes, visibility
from pdcswap.errors import DomainError, ResolutionError
from pdcswap.oracle import (BeamSplitter, FockGrid, ModeNetwork, PhaseShifter, apply_network, build_pair_amplitude,
                            fringe, oracle_visibility, pair_time_correlation, state_norm, swap_network)
from pdcswap.spectra import SourceSpectra, SpectralProfile, eval_frequency

W0 = 10.0
SETTINGS = [(1.0, 1.0), (1.0, 0.1), (2.0, 0.5)]


def gaussian_config(n, sigma, sigma_f, **kw):
    return ChainConfig(n, SourceSpectra.gaussian(W0, sigma, sigma_f), **kw)


def analytic_visibility(n, sigma, sigma_f):
    return visibility(swap_amplitudes(gaussian_config(n, sigma, sigma_f)))


# grid and pair amplitudes ------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(DomainError):
        FockGrid(1, (0, 1), (0, 1))
    with pytest.raises(DomainError):
        FockGrid(8, (1, 0), (0, 1))
    g = FockGrid.for_spectra(SourceSpectra.gaussian(W0, 1.0, 0.25), bins=16)
    w, d = g.idler
    assert w[0] - d / 2 == pytest.approx(W0 / 2 - 6 * 0.5) and w.size == 16
    E = g.detection_matrix("signal")
    np.testing.assert_allclose(E @ E.conj().T, np.eye(16), atol=1e-12)


def test_external_and_internal_differ_by_filter():
    src = SourceSpectra.gaussian(W0, 1.0, 0.3)
    grid = FockGrid.for_spectra(src, 16)
    # a grid whose second band coincides with the internal band makes the comparison binwise
    same = FockGrid(16, grid.idler_range, grid.idler_range)
    ext = build_pair_amplitude("external", src, same)
    inn = build_pair_amplitude("internal", src, same)
    f_s = eval_frequency(src.filter, same.idler[0])
    np.testing.assert_allclose(inn, ext * f_s[None, None, :], rtol=1e-14, atol=0)


def test_branches_are_equal():
    src = SourceSpectra.gaussian(W0, 1.0, 0.3)
    for kind in ("external", "internal"):
        amp = build_pair_amplitude(kind, src, FockGrid.for_spectra(src, 16))
        assert amp.shape == (2, 16, 16)
        np.testing.assert_array_equal(amp[0], amp[1])


def test_pair_norm_converges():
    src = SourceSpectra.gaussian(W0, 1.0, 0.3)
    norms = [np.sum(np.abs(build_pair_amplitude("external", src, FockGrid.for_spectra(src, m))[0]) ** 2)
             for m in (16, 32, 64)]
    assert norms[2] / norms[1] == pytest.approx(1.0, abs=0.01)
    assert abs(norms[2] / norms[1] - 1) <= abs(norms[1] / norms[0] - 1)


def test_pair_amplitude_rejects_unknown_kind_and_coarse_grid():
    src = SourceSpectra.gaussian(W0, 1.0, 1.0)
    with pytest.raises(DomainError):
        build_pair_amplitude("middle", src, FockGrid.for_spectra(src, 16))
    with pytest.raises(ResolutionError):
        build_pair_amplitude("external", src, FockGrid.for_spectra(src, 4))


# network ----------------------------------------------------------------------------------

def test_two_splitters_swap_ports_with_phase():
    net = ModeNetwork(["x", "y"]).add(BeamSplitter("x", "y")).add(BeamSplitter("x", "y"))
    np.testing.assert_allclose(net.unitary(), [[0, 1j], [1j, 0]], atol=1e-15)


def test_phase_shift_then_inverse_is_identity():
    net = ModeNetwork(["x", "y"]).add(PhaseShifter("x", 0.83)).add(PhaseShifter("x", -0.83))
    np.testing.assert_allclose(net.unitary(), np.eye(2), atol=1e-15)


def test_unknown_beam_rejected():
    net = ModeNetwork(["x", "y"])
    with pytest.raises(DomainError):
        net.add(BeamSplitter("x", "z"))
    with pytest.raises(DomainError):
        apply_network({("x", "q"): np.ones(2)}, net)


@st.composite
def networks(draw):
    beams = [f"m{k}" for k in range(draw(st.integers(2, 6)))]
    net = ModeNetwork(beams)
    for _ in range(draw(st.integers(1, 10))):
        if draw(st.booleans()):
            i, j = draw(st.lists(st.sampled_from(beams), min_size=2, max_size=2, unique=True))
            net.add(BeamSplitter(i, j))
        else:
            net.add(PhaseShifter(draw(st.sampled_from(beams)), draw(st.floats(-10, 10))))
    return net


@settings(max_examples=60, deadline=None)
@given(networks(), st.integers(0, 2**31))
def test_network_preserves_norm(net, seed):
    rng = np.random.default_rng(seed)
    U = net.unitary()
    np.testing.assert_allclose(U @ U.conj().T, np.eye(len(net.beams)), atol=1e-12)
    state = {}
    for _ in range(3):
        key = tuple(rng.choice(net.beams, 2))
        state[key] = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    before = state_norm(state)
    assert state_norm(apply_network(state, net)) == pytest.approx(before, rel=1e-12)


def test_swap_network_layout():
    sn = swap_network(3, 0.1, 0.2)
    assert sn.internal_detectors == ["R1'", "R1", "R2'", "R2"]
    assert sn.output_detectors == ["a", "f"]
    assert len(sn.branches) == 3
    U = sn.network.unitary()
    np.testing.assert_allclose(U @ U.conj().T, np.eye(len(sn.network.beams)), atol=1e-12)


# visibility -------------------------------------------------------------------------------

def test_two_sources_narrow_filter_high_visibility():
    c = gaussian_config(2, 1.0, 0.05)
    v32 = oracle_visibility(c, FockGrid.for_spectra(c.spectra, 32))
    v64 = oracle_visibility(c, FockGrid.for_spectra(c.spectra, 64))
    assert v32 >= 0.95 and v64 >= 0.95
    assert v64 == pytest.approx(v32, abs=1e-6)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("sigma, sigma_f", SETTINGS)
def test_oracle_agrees_with_analytic(n, sigma, sigma_f):
    c = gaussian_config(n, sigma, sigma_f)
    v = oracle_visibility(c, FockGrid.for_spectra(c.spectra, 32))
    assert v == pytest.approx(analytic_visibility(n, sigma, sigma_f), rel=0.01)


def test_four_sources_agree():
    c = gaussian_config(4, 1.0, 1.0)
    start = time.perf_counter()
    v = oracle_visibility(c, FockGrid.for_spectra(c.spectra, 16))
    assert time.perf_counter() - start < 120
    assert v == pytest.approx(analytic_visibility(4, 1.0, 1.0), rel=0.03)


def test_oracle_converges_under_refinement():
    c = gaussian_config(3, 1.0, 1.0)
    v = [oracle_visibility(c, FockGrid.for_spectra(c.spectra, m)) for m in (16, 32, 64)]
    exact = analytic_visibility(3, 1.0, 1.0)
    assert abs(v[2] - v[1]) < abs(v[1] - v[0])
    assert abs(v[2] - exact) <= abs(v[0] - exact)


def test_fringe_is_a_cosine_with_the_visibility():
    c = gaussian_config(2, 1.0, 0.3, phase_f=0.4)
    phases, P = fringe(c, FockGrid.for_spectra(c.spectra, 32), phases=16)
    v = analytic_visibility(2, 1.0, 0.3)
    assert (P.max() - P.min()) / (P.max() + P.min()) == pytest.approx(v, rel=0.01)
    harmonics = np.abs(np.fft.rfft(P))
    assert np.all(harmonics[2:] < 1e-10 * harmonics[0])


def test_global_pump_phase_does_not_change_visibility():
    w = np.linspace(W0 - 8, W0 + 8, 801)
    shape = np.exp(-(w - W0) ** 2 / 2)
    wf = np.linspace(W0 / 2 - 6, W0 / 2 + 6, 601)
    filt = SpectralProfile.tabulated(wf, np.exp(-(wf - W0 / 2) ** 2 / (2 * 0.5)), center=W0 / 2)
    plain = SourceSpectra(SpectralProfile.tabulated(w, shape, center=W0), filt)
    rotated = SourceSpectra(SpectralProfile.tabulated(w, shape * np.exp(1.234j), center=W0), filt)
    for n in (2, 3):
        grid = FockGrid.for_spectra(plain, 32)
        a = oracle_visibility(ChainConfig(n, plain, integration="quadrature"), grid)
        b = oracle_visibility(ChainConfig(n, rotated, integration="quadrature"), grid)
        assert b == pytest.approx(a, rel=1e-12)


def test_resolution_errors():
    c = gaussian_config(3, 1.0, 1.0)
    with pytest.raises(ResolutionError):
        oracle_visibility(c, FockGrid.for_spectra(c.spectra, 4))
    with pytest.raises(ResolutionError) as info:
        oracle_visibility(c, FockGrid.for_spectra(c.spectra, 16), tolerance=1e-12)
    v_coarse, v_fine = info.value.values
    assert abs(v_fine - v_coarse) == pytest.approx(info.value.residual)
    assert oracle_visibility(c, FockGrid.for_spectra(c.spectra, 32), tolerance=0.01) == pytest.approx(
        analytic_visibility(3, 1.0, 1.0), rel=0.01)


def test_too_many_sources_rejected():
    c = gaussian_config(5, 1.0, 1.0)
    with pytest.raises(DomainError):
        oracle_visibility(c, FockGrid.for_spectra(c.spectra, 8))


# pair time correlation ---------------------------------------------------------------------

def test_correlation_normalized_and_even():
    src = SourceSpectra.gaussian(W0, 1.0, 0.4)
    assert pair_time_correlation(src, 0.0) == pytest.approx(1.0, rel=1e-15)
    dt = np.linspace(0.1, 5, 12)
    np.testing.assert_allclose(pair_time_correlation(src, dt), pair_time_correlation(src, -dt), rtol=1e-12)
    with pytest.raises(DomainError):
        pair_time_correlation(src, np.nan)


@pytest.mark.parametrize("sigma_f", [0.1, 0.4, 2.0])
def test_gaussian_correlation_is_gaussian_in_time(sigma_f):
    src = SourceSpectra.gaussian(W0, 1.0, sigma_f)
    dt = np.linspace(0, 3 / math.sqrt(sigma_f), 20)
    y = np.log(pair_time_correlation(src, dt))
    slope, intercept = np.polyfit(dt**2, y, 1)
    resid = y - (slope * dt**2 + intercept)
    r2 = 1 - np.sum(resid**2) / np.sum((y - y.mean()) ** 2)
    assert r2 > 0.9999
    # two filter factors at width sigma_f make a gaussian of width sigma_f / 2 in frequency
    assert slope == pytest.approx(-sigma_f / 2, rel=1e-9)


def test_tabulated_correlation_vs_trapezoid():
    wf = np.array([3.8, 4.0, 6.0, 6.2])
    src = SourceSpectra(SpectralProfile.gaussian(W0, 1.0), SpectralProfile.tabulated(wf, [0, 1, 1, 0], center=5.0))
    w = np.linspace(3.7, 6.3, 200001)
    prod = eval_frequency(src.filter, W0 - w) * eval_frequency(src.filter, w)
    ref0 = abs(np.trapezoid(prod, w)) ** 2
    for t in (0.3, 1.1, 2.5):
        ref = abs(np.trapezoid(prod * np.exp(-1j * w * t), w)) ** 2 / ref0
        assert pair_time_correlation(src, t) == pytest.approx(ref, rel=1e-6)
