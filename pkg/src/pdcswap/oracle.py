"""Brute-force simulator of the swapping network on discretized frequencies.

Nothing here uses the kernels or the closed-form machinery of the analytic
path.  Each source is a two-photon amplitude on frequency bins, photons are
routed through an explicit network of 50-50 beamsplitters and phase shifters,
detection times come from a discrete Fourier transform of each photon's bins,
and the coincidence probability is a plain sum of squared amplitudes over
all detection-time bins.

Two frequency bands are used: internal (filtered) photons live on a band
centered at the filter, output photons on a band centered at the signal
frequency.  The time grid of each band is its DFT conjugate, which makes the
frequency-to-time map unitary, so the time sums are exact for the binned
state and the only approximation is the frequency binning itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainConfig
from .errors import DomainError, ResolutionError
from .gaussform import ComplexQuadraticForm, integrate_all
from .spectra import SourceSpectra, eval_frequency, piecewise_integral

MAX_SOURCES = 4


@dataclass(frozen=True)
class FockGrid:
    """Frequency bins for internal and output photons.

    Both bands hold ``bins`` cells; cell centers are used as sample points.
    The detection-time grid of each band is its DFT conjugate, with spacing
    ``2 pi / (bins * spacing)`` and ``bins`` points.
    """

    bins: int
    idler_range: tuple[float, float]
    signal_range: tuple[float, float]

    def __post_init__(self):
        if not isinstance(self.bins, (int, np.integer)) or self.bins < 2:
            raise DomainError(f"grid needs at least 2 bins, got {self.bins!r}")
        for lo, hi in (self.idler_range, self.signal_range):
            if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
                raise DomainError(f"invalid frequency range ({lo}, {hi})")

    @classmethod
    def for_spectra(cls, spectra: SourceSpectra, bins: int = 32, widths: float = 6.0) -> "FockGrid":
        """Bands spanning ``widths`` effective widths either side of each center."""
        wf = spectra.filter.effective_width
        wp = spectra.pump.effective_width
        ci, cs = spectra.idler_reference, spectra.signal_reference
        half_i = widths * wf
        half_s = widths * math.hypot(wf, wp)
        return cls(int(bins), (ci - half_i, ci + half_i), (cs - half_s, cs + half_s))

    def refined(self, factor: int = 2) -> "FockGrid":
        return FockGrid(self.bins * factor, self.idler_range, self.signal_range)

    @staticmethod
    def _centers(rng, m):
        lo, hi = rng
        d = (hi - lo) / m
        return lo + d * (np.arange(m) + 0.5), d

    @property
    def idler(self) -> tuple[np.ndarray, float]:
        return self._centers(self.idler_range, self.bins)

    @property
    def signal(self) -> tuple[np.ndarray, float]:
        return self._centers(self.signal_range, self.bins)

    def times(self, band: str) -> np.ndarray:
        _, d = self.idler if band == "idler" else self.signal
        dt = 2 * np.pi / (self.bins * d)
        return dt * (np.arange(self.bins) - self.bins // 2)

    def detection_matrix(self, band: str) -> np.ndarray:
        """Unitary map from sqrt(bin width)-weighted amplitudes to time-bin amplitudes.

        Row k is the binned detector operator at time t_k, scaled by the
        square root of the time-bin width.
        """
        w, _ = self.idler if band == "idler" else self.signal
        t = self.times(band)
        return np.exp(-1j * np.outer(t, w)) / np.sqrt(self.bins)


def build_pair_amplitude(kind: str, spectra: SourceSpectra, grid: FockGrid) -> np.ndarray:
    """Two-photon amplitude of one source, shape (2 branches, first-photon bin, second-photon bin).

    The first photon is always filtered and lives on the internal band.  For
    ``external`` sources the second photon is unfiltered and lives on the
    output band; for ``internal`` sources it is filtered and lives on the
    internal band.  Values are the spectral amplitude times the square root
    of both bin widths, so squared sums approximate the continuum norm.
    """
    if kind not in ("external", "internal"):
        raise DomainError(f"kind must be 'external' or 'internal', got {kind!r}")
    wi, di = grid.idler
    ws, ds = grid.signal if kind == "external" else grid.idler
    pump_scale = spectra.pump.effective_width
    # the pump ridge w_i + w_s = const is lost once a bin is wider than twice its width
    if max(di, ds) > 2 * pump_scale:
        raise ResolutionError(
            f"bin spacing {max(di, ds):.4g} exceeds twice the pump width {pump_scale:.4g}; "
            "energy conservation unresolved",
            values=(max(di, ds), pump_scale))
    amp = eval_frequency(spectra.pump, wi[:, None] + ws[None, :]) * eval_frequency(spectra.filter, wi)[:, None]
    if kind == "internal":
        amp = amp * eval_frequency(spectra.filter, ws)[None, :]
    amp = np.asarray(amp, dtype=complex) * np.sqrt(di * ds)
    return np.stack([amp, amp])


# Mode network ------------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamSplitter:
    """Symmetric 50-50 splitter: the reflected amplitude picks up a factor i."""

    first: str
    second: str

    def matrix(self) -> np.ndarray:
        return np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.first, self.second)


@dataclass(frozen=True)
class PhaseShifter:
    mode: str
    phase: float

    def matrix(self) -> np.ndarray:
        return np.array([[np.exp(1j * self.phase)]])

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.mode,)


@dataclass
class ModeNetwork:
    """Linear optics on labeled beams.

    Each element maps creation operators of its modes as
    ``a_in^dag -> sum_out U[out, in] a_out^dag``; ports keep their labels, so
    after a beamsplitter the label of an input beam names the output port
    that continues it.
    """

    beams: list[str]
    elements: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.beams)) != len(self.beams):
            raise DomainError("beam labels must be unique")
        self._index = {b: k for k, b in enumerate(self.beams)}

    def index(self, beam: str) -> int:
        try:
            return self._index[beam]
        except KeyError:
            raise DomainError(f"unknown beam label {beam!r}") from None

    def add(self, element) -> "ModeNetwork":
        for m in element.modes:
            self.index(m)
        self.elements.append(element)
        return self

    def unitary(self) -> np.ndarray:
        """Single-photon transfer matrix U[out, in] of the whole network."""
        d = len(self.beams)
        U = np.eye(d, dtype=complex)
        for el in self.elements:
            idx = [self.index(m) for m in el.modes]
            step = np.eye(d, dtype=complex)
            step[np.ix_(idx, idx)] = el.matrix()
            U = step @ U
        return U


def apply_network(state: dict[tuple[str, str], np.ndarray], net: ModeNetwork) -> dict[tuple[str, str], np.ndarray]:
    """Route a two-photon state through the network.

    ``state`` maps (beam of photon 1, beam of photon 2) to the amplitude on
    that pair of beams; the result uses output-port labels.  Photons are kept
    labeled, so the squared norm summed over all keys is conserved.
    """
    U = net.unitary()
    out: dict[tuple[str, str], np.ndarray] = {}
    for (m1, m2), amp in state.items():
        i1, i2 = net.index(m1), net.index(m2)
        for o1, o2 in itertools.product(range(len(net.beams)), repeat=2):
            coef = U[o1, i1] * U[o2, i2]
            if coef == 0:
                continue
            key = (net.beams[o1], net.beams[o2])
            out[key] = out.get(key, 0) + coef * amp
    return out


def state_norm(state: dict[tuple[str, str], np.ndarray]) -> float:
    return float(sum(np.sum(np.abs(v) ** 2) for v in state.values()))


@dataclass(frozen=True)
class SwapNetwork:
    """Beams, source branches and post-selected detectors of an n-source chain."""

    network: ModeNetwork
    # per source: the (first photon beam, second photon beam) of each branch
    branches: list[tuple[tuple[str, str], tuple[str, str]]]
    internal_detectors: list[str]
    output_detectors: list[str]


def swap_network(n: int, phase_a: float, phase_f: float) -> SwapNetwork:
    """Mode network of an n-source swapping chain with its two output interferometers.

    Source k emits either into its unprimed beam pair or its primed pair.
    Station k joins the rightward beams of source k with the leftward beams
    of source k+1 on two splitters: primed beams feed detector ``i{2k-1}``,
    unprimed beams feed ``i{2k}``.  The leftward beams of source 1 (``a``,
    ``a'``) and the rightward beams of source n (``f``, ``f'``) are the
    outputs, recombined after phase shifts on ``a'`` and ``f``.
    """
    beams = []
    branches = []
    for k in range(1, n + 1):
        left = ("a", "a'") if k == 1 else (f"L{k}", f"L{k}'")
        right = ("f", "f'") if k == n else (f"R{k}", f"R{k}'")
        beams += [*left, *right]
        # first photon is the filtered one heading to a station
        if k == 1:
            branches.append(((right[0], left[0]), (right[1], left[1])))
        else:
            branches.append(((left[0], right[0]), (left[1], right[1])))
    net = ModeNetwork(beams)
    internal = []
    for k in range(1, n):
        # transmitted port keeps the source-k label and is the post-selected detector
        net.add(BeamSplitter(f"R{k}'", f"L{k + 1}'"))
        net.add(BeamSplitter(f"R{k}", f"L{k + 1}"))
        internal += [f"R{k}'", f"R{k}"]
    net.add(PhaseShifter("a'", phase_a)).add(BeamSplitter("a", "a'"))
    net.add(PhaseShifter("f", phase_f)).add(BeamSplitter("f", "f'"))
    return SwapNetwork(net, branches, internal, ["a", "f"])


def _detection_terms(sn: SwapNetwork, n: int) -> dict[tuple, complex]:
    """Coefficient of every way to put the 2n photons on the 2n post-selected detectors.

    Keys are tuples of (first-photon detector, second-photon detector) per
    source; terms with the same key share one time-domain amplitude.
    """
    U = sn.network.unitary()
    idx = sn.network.index
    detectors = sn.internal_detectors + sn.output_detectors
    det_idx = [idx(d) for d in detectors]
    # C[k][o1, o2]: amplitude for source k to put photon 1 on o1 and photon 2 on o2
    C = []
    for (x, y), (xp, yp) in sn.branches:
        C.append(np.outer(U[det_idx, idx(x)], U[det_idx, idx(y)]) + np.outer(U[det_idx, idx(xp)], U[det_idx, idx(yp)]))
    terms: dict[tuple, complex] = {}

    def walk(k, used, key, coef):
        if k == n:
            terms[key] = terms.get(key, 0) + coef
            return
        for o1 in range(len(detectors)):
            if o1 in used:
                continue
            for o2 in range(len(detectors)):
                if o2 in used or o2 == o1 or C[k][o1, o2] == 0:
                    continue
                walk(k + 1, used | {o1, o2}, key + ((o1, o2),), coef * C[k][o1, o2])

    walk(0, frozenset(), (), 1.0 + 0j)
    return {k: v for k, v in terms.items() if abs(v) > 1e-14}


def _time_amplitudes(spectra: SourceSpectra, grid: FockGrid, n: int) -> list[np.ndarray]:
    """Per-source amplitude over (first-photon time bin, second-photon time bin)."""
    Ei = grid.detection_matrix("idler")
    Es = grid.detection_matrix("signal")
    ext = build_pair_amplitude("external", spectra, grid)[0]
    psi_ext = Ei @ ext @ Es.T
    out = [psi_ext]
    if n > 2:
        inn = build_pair_amplitude("internal", spectra, grid)[0]
        out += [Ei @ inn @ Ei.T] * (n - 2)
    out.append(psi_ext)
    return out


def _letters(k: int) -> str:
    return "abcdefghijklmnopqrstuvwxyz"[k]


def _overlap(psis: list[np.ndarray], key_a: tuple, key_b: tuple) -> complex:
    """sum over all detector times of prod_k psi_k[key_a] conj(prod_k psi_k[key_b])."""
    operands = []
    subs = []
    for psi, (o1, o2) in zip(psis, key_a):
        operands.append(psi)
        subs.append(_letters(o1) + _letters(o2))
    for psi, (o1, o2) in zip(psis, key_b):
        operands.append(psi.conj())
        subs.append(_letters(o1) + _letters(o2))
    return complex(np.einsum(",".join(subs) + "->", *operands, optimize="greedy"))


def fringe(config: ChainConfig, grid: FockGrid, phases: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Coincidence probability at the two output detectors over a sweep of phase_a.

    Returns ``(phase differences, probabilities)``; ``phase_f`` is held at
    the configured value.
    """
    n = config.n
    if n > MAX_SOURCES:
        raise DomainError(f"oracle supports n <= {MAX_SOURCES}, got {n}")
    psis = _time_amplitudes(config.spectra, grid, n)
    phis = config.phase_f + 2 * np.pi * np.arange(phases) / phases
    term_sets = [_detection_terms(swap_network(n, phi, config.phase_f), n) for phi in phis]
    keys = sorted(set().union(*term_sets))
    N = np.empty((len(keys), len(keys)), dtype=complex)
    for i, ka in enumerate(keys):
        for j in range(i, len(keys)):
            N[i, j] = _overlap(psis, ka, keys[j])
            N[j, i] = np.conj(N[i, j])
    probs = np.empty(phases)
    for m, terms in enumerate(term_sets):
        c = np.array([terms.get(k, 0) for k in keys])
        probs[m] = float(np.real(c @ N @ c.conj()))
    return phis - config.phase_f, probs


def _fringe_visibility(probs: np.ndarray) -> float:
    # single-photon phase enters linearly, so P is a pure first harmonic plus offset
    harmonics = np.fft.rfft(probs) / probs.size
    return float(2 * abs(harmonics[1]) / harmonics[0].real)


def oracle_visibility(config: ChainConfig, grid: FockGrid | None = None, tolerance: float | None = None,
                      phases: int = 8) -> float:
    """Fringe visibility (max P - min P)/(max P + min P) from the binned simulation.

    With ``tolerance`` set the grid is also refined twofold, and a change in
    visibility larger than ``tolerance`` raises :class:`ResolutionError`.
    """
    if grid is None:
        grid = FockGrid.for_spectra(config.spectra)
    v = _fringe_visibility(fringe(config, grid, phases)[1])
    if tolerance is not None:
        v2 = _fringe_visibility(fringe(config, grid.refined(), phases)[1])
        if abs(v2 - v) > tolerance:
            raise ResolutionError(
                f"oracle visibility moved from {v:.10g} (M={grid.bins}) to {v2:.10g} (M={2 * grid.bins})",
                values=(v, v2), residual=abs(v2 - v))
        return v2
    return v


# Pair time correlation ---------------------------------------------------------------------

def _correlation_amplitude(spectra: SourceSpectra, dt: np.ndarray) -> np.ndarray:
    w0 = spectra.pump.center
    f = spectra.filter
    if f.is_gaussian:
        # f(w0 - w) f(w) exp(-i w dt) in w: a gaussian in w with linear phase
        out = []
        for t in dt:
            q = (ComplexQuadraticForm.along([1.0], 1 / f.width, 0.0, 0.0, shift=f.center)
                 * ComplexQuadraticForm.along([1.0], 1 / f.width, 0.0, 0.0, shift=w0 - f.center)
                 * ComplexQuadraticForm([[0.0]], [-1j * t], 0.0))
            out.append(integrate_all(q))
        return np.array(out)
    bp = np.concatenate([f.breakpoints, w0 - f.breakpoints])
    return piecewise_integral(
        lambda w: np.exp(-1j * np.outer(dt, w)) * eval_frequency(f, w0 - w) * eval_frequency(f, w), bp)


def pair_time_correlation(spectra: SourceSpectra, dt) -> np.ndarray | float:
    """Relative coincidence rate of a filtered pair at detection-time offset ``dt``.

    ``|int exp(-i w dt) f(w0 - w) f(w) dw|^2``, normalized to 1 at ``dt = 0``.
    """
    d = np.atleast_1d(np.asarray(dt, dtype=float))
    if not np.all(np.isfinite(d)):
        raise DomainError("time offset must be finite")
    num = np.abs(_correlation_amplitude(spectra, d)) ** 2
    den = abs(_correlation_amplitude(spectra, np.zeros(1))[0]) ** 2
    out = num / den
    return out if np.ndim(dt) else float(out[0])


__all__ = [
    "FockGrid", "ModeNetwork", "BeamSplitter", "PhaseShifter", "SwapNetwork", "swap_network",
    "build_pair_amplitude", "apply_network", "state_norm", "fringe", "oracle_visibility",
    "pair_time_correlation", "MAX_SOURCES",
]
