"""Entanglement-swapping chain of n down-conversion sources.

Sources 1 and n are the outer sources: one filtered photon goes to an inner
detector and the unfiltered partner leaves through the output ports.  The
n - 2 inner sources send both photons, filtered, to inner detectors.  Each of
the n - 1 internal beamsplitter stations has two detectors, and the
post-selected event (one click per station, two per station pair) is
compatible with exactly two firing patterns.  Writing the click times at
station k as ``p_k`` and ``q_k`` the two patterns give the amplitudes

    X = g(w1, p1) h(q1, p2) h(q2, p3) ... h(q_{n-2}, p_{n-1}) g(wn, q_{n-1})
    Y = g(w1, q1) h(p1, q2) h(p2, q3) ... h(p_{n-2}, q_{n-1}) g(wn, p_{n-1})

and the output path state is proportional to
``b |00><00| + c |11><11| + a |00><11| + conj(a) |11><00|`` with
``a = int X conj(Y)``, ``b = int |X|^2``, ``c = int |Y|^2``.

For three sources with ``(p1, q1, p2, q2) = (t2, t1, t4, t3)`` the patterns are
the time-domain amplitudes ``T1`` and ``T2``, and the coefficients ``F1234``,
``G1234`` and ``G2143`` are the corresponding integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import montecarlo
from .errors import DegeneratePostselectionError, DomainError, InvalidStateError
from .gaussform import ComplexQuadraticForm, integrate_all, marginalize, modulus, product_all
from .spectra import SourceSpectra, eval_frequency, filter_time, h_kernel, pump_time

TWO_PI = 2 * np.pi
INTEGRATION_METHODS = ("analytic", "quadrature")


@dataclass(frozen=True)
class ChainConfig:
    """Chain of ``n`` identical sources and the two output phase settings.

    Phases are reduced to [0, 2pi).  ``tolerance`` bounds the estimated
    relative error of the quadrature path; ``samples``, ``seed`` and
    ``workers`` drive Monte-Carlo cross-checks.
    """

    n: int
    spectra: SourceSpectra
    phase_a: float = 0.0
    phase_f: float = 0.0
    integration: str = "analytic"
    tolerance: float = 1e-8
    samples: int = 10**6
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 2:
            raise DomainError(f"chain needs n >= 2 sources, got {self.n!r}")
        if self.integration not in INTEGRATION_METHODS:
            raise DomainError(f"integration must be one of {INTEGRATION_METHODS}, got {self.integration!r}")
        if not (np.isfinite(self.phase_a) and np.isfinite(self.phase_f)):
            raise DomainError("phases must be finite")
        if self.tolerance <= 0 or self.samples < 1 or self.workers < 1:
            raise DomainError("tolerance, samples and workers must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "phase_a", float(self.phase_a) % TWO_PI)
        object.__setattr__(self, "phase_f", float(self.phase_f) % TWO_PI)

    def with_(self, **changes) -> "ChainConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SwapAmplitudes:
    """Unnormalized coefficients (a, b, c) of the post-selected path state."""

    a: complex
    b: float
    c: float
    error: float = field(default=0.0, compare=False)

    def __post_init__(self):
        a, b, c = complex(self.a), float(self.b), float(self.c)
        if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
            raise DomainError("swap amplitudes must be finite")
        if b < 0 or c < 0:
            raise InvalidStateError(f"b and c must be nonnegative, got b={b}, c={c}")
        if abs(a) > math.sqrt(b * c) * (1 + 1e-9) + 1e-300:
            raise InvalidStateError(f"|a| = {abs(a)} exceeds sqrt(b c) = {math.sqrt(b * c)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def r_a(self) -> float:
        return abs(self.a)

    @property
    def theta_a(self) -> float:
        return float(np.angle(self.a))


@dataclass(frozen=True)
class MaximallyCorrelatedState:
    """State p00 |00><00| + p11 |11><11| + r (|00><11| + |11><00|).

    ``theta`` keeps the coherence phase that was absorbed into |1>.
    """

    p00: float
    p11: float
    r: float
    theta: float = 0.0

    def __post_init__(self):
        for name in ("p00", "p11", "r"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidStateError(f"{name} must be finite")
        if self.p00 < -1e-12 or self.p11 < -1e-12 or self.r < 0:
            raise InvalidStateError("weights and coherence must be nonnegative")
        if abs(self.p00 + self.p11 - 1) > 1e-10:
            raise InvalidStateError(f"p00 + p11 = {self.p00 + self.p11}, expected 1")
        if self.r > math.sqrt(max(self.p00 * self.p11, 0.0)) + 1e-10:
            raise InvalidStateError(f"coherence {self.r} exceeds sqrt(p00 p11)")

    @property
    def visibility(self) -> float:
        return 2 * self.r / (self.p00 + self.p11)

    @classmethod
    def from_visibility(cls, v: float) -> "MaximallyCorrelatedState":
        """Equal-weight member of the family with the given visibility."""
        if not 0 <= v <= 1:
            raise DomainError(f"visibility must lie in [0, 1], got {v}")
        return cls(0.5, 0.5, 0.5 * v)


# Time-domain amplitudes for three sources ------------------------------------------------

def _require_three(config: ChainConfig):
    if config.n != 3:
        raise DomainError(f"this operation is defined for n = 3 sources, got n = {config.n}")


def amplitude_T(config: ChainConfig, which: str, outer_times, inner_times):
    """Amplitude of one firing pattern as a function of all six click times.

    ``outer_times`` are the output click times (t_a, t_f) and ``inner_times``
    the four internal ones (t1, t2, t3, t4).  Arrays broadcast.  ``T2`` is
    ``T1`` with t1 <-> t2 and t3 <-> t4.
    """
    _require_three(config)
    if which not in ("T1", "T2"):
        raise DomainError(f"which must be 'T1' or 'T2', got {which!r}")
    ta, tf = (np.asarray(x, dtype=float) for x in outer_times)
    t1, t2, t3, t4 = (np.asarray(x, dtype=float) for x in inner_times)
    if which == "T2":
        t1, t2, t3, t4 = t2, t1, t4, t3
    src = config.spectra
    out = (TWO_PI * pump_time(src, ta) * filter_time(src, ta - t2)
           * pump_time(src, tf) * filter_time(src, tf - t3) * h_kernel(src, t1, t4))
    return out if np.ndim(out) else complex(out)


def _pattern_form(src: SourceSpectra, inner: tuple[int, int, int, int], tau: int) -> ComplexQuadraticForm:
    """Baseband T over (t1, t2, t3, t4, t_a, t_f, tau, tau_bar).

    ``inner`` gives the variable indices playing t1..t4 and ``tau`` the index
    of the integration variable inside h.
    """
    P = src.pump_time_form()
    f = src.filter_time_form()
    ap, bp, cp = P.A[0, 0], P.b[0], P.c
    af, bf, cf = f.A[0, 0], f.b[0], f.c
    x1, x2, x3, x4 = inner

    def unit(k, sign=1.0):
        e = np.zeros(8)
        e[k] = sign
        return e

    parts = [
        ComplexQuadraticForm.along(unit(4), ap, bp, cp),
        ComplexQuadraticForm.along(unit(4) - unit(x2), af, bf, cf),
        ComplexQuadraticForm.along(unit(5), ap, bp, cp),
        ComplexQuadraticForm.along(unit(5) - unit(x3), af, bf, cf),
        ComplexQuadraticForm.along(unit(tau), ap, bp + 1j * src.detuning, cp),
        ComplexQuadraticForm.along(unit(tau) - unit(x1), af, bf, cf),
        ComplexQuadraticForm.along(unit(tau) - unit(x4), af, bf, cf),
    ]
    return product_all(parts).scale(TWO_PI)


_T1 = (0, 1, 2, 3)
_T2 = (1, 0, 3, 2)


def _inner_form(config: ChainConfig, first, second) -> ComplexQuadraticForm:
    """int T_first conj(T_second) dt_a dt_f, as a form in (t1, t2, t3, t4)."""
    src = config.spectra
    q = _pattern_form(src, first, 6) * _pattern_form(src, second, 7).conj()
    return marginalize(q, [4, 5, 6, 7])


def coefficient_F1234(config: ChainConfig) -> float:
    """Cross coefficient: integral over t1..t4 of |int T1 conj(T2) dt_a dt_f|.

    The output-time integrals run first (equivalently the two output
    frequencies), then the modulus, then the internal times.
    """
    _require_three(config)
    if not config.spectra.is_gaussian:
        return _coefficient_numeric(config, "F")
    return float(integrate_all(modulus(_inner_form(config, _T1, _T2))).real)


def coefficient_G(config: ChainConfig, order: str | int = "1234") -> float:
    """Direct coefficient: integral of |T1|^2 (order 1234) or |T2|^2 (order 2143)."""
    _require_three(config)
    order = str(order)
    if order not in ("1234", "2143"):
        raise DomainError(f"order must be '1234' or '2143', got {order!r}")
    if not config.spectra.is_gaussian:
        return _coefficient_numeric(config, "G" + order)
    pat = _T1 if order == "1234" else _T2
    return float(integrate_all(_inner_form(config, pat, pat)).real)


def _coefficient_numeric(config: ChainConfig, which: str) -> float:
    grid = _QuadratureGrid.build(config.spectra, config.n, 1)
    if which == "F":
        return grid.three_source_cross_modulus()
    # |X|^2 factorizes over disjoint variables
    amps = grid.amplitudes(3)
    return amps.b if which == "G1234" else amps.c


# General n ---------------------------------------------------------------------------------

def _chain_variables(n: int):
    """Index layout (w1, wn, p1, q1, ..., p_{n-1}, q_{n-1}) of the 2n integration variables."""
    p = [2 + 2 * k for k in range(n - 1)]
    q = [3 + 2 * k for k in range(n - 1)]
    return 0, 1, p, q


def pattern_forms(src: SourceSpectra, n: int) -> tuple[ComplexQuadraticForm, ComplexQuadraticForm]:
    """Baseband X and Y as forms over (w1, wn, p1, q1, ..., p_{n-1}, q_{n-1})."""
    d = 2 * n
    g = src.g_form()
    h = src.h_form()
    w1, wn, p, q = _chain_variables(n)

    def build(first, second):
        parts = [g.embed(d, [w1, first[0]]), g.embed(d, [wn, second[-1]])]
        parts += [h.embed(d, [second[k - 1], first[k]]) for k in range(1, n - 1)]
        return product_all(parts)

    return build(p, q), build(q, p)


def swap_amplitudes(config: ChainConfig) -> SwapAmplitudes:
    """Coefficients (a, b, c) of the post-selected output path state."""
    if config.integration == "analytic":
        if not config.spectra.is_gaussian:
            raise DomainError("analytic integration needs gaussian spectra; use integration='quadrature'")
        X, Y = pattern_forms(config.spectra, config.n)
        a = integrate_all(X * Y.conj())
        b = integrate_all(X * X.conj()).real
        c = integrate_all(Y * Y.conj()).real
        return SwapAmplitudes(a, b, c)
    return quadrature_amplitudes(config)


def output_state(amps: SwapAmplitudes) -> MaximallyCorrelatedState:
    """Normalized path state; the coherence phase is absorbed into |1>."""
    total = amps.b + amps.c
    if not total > 0:
        raise DegeneratePostselectionError("b + c = 0: the post-selected event never occurs")
    return MaximallyCorrelatedState(amps.b / total, amps.c / total, amps.r_a / total, amps.theta_a)


def visibility(amps: SwapAmplitudes) -> float:
    """Fringe visibility 2 |a| / (b + c)."""
    total = amps.b + amps.c
    if not total > 0:
        raise DegeneratePostselectionError("b + c = 0: the post-selected event never occurs")
    return 2 * amps.r_a / total


def detection_probability(amps: SwapAmplitudes, phase_a: float, phase_f: float) -> float:
    """Unnormalized coincidence probability at the two '+' output ports.

    The fringe offset is the coherence phase arg(a).
    """
    return amps.b + amps.c + 2 * amps.r_a * math.cos(phase_a - phase_f + amps.theta_a)


# Grid quadrature -------------------------------------------------------------------------

@dataclass
class _QuadratureGrid:
    """Uniform grids in baseband frequency and detection time.

    Kernels are trapezoid sums over the frequency grids; the resulting g and
    h matrices are then contracted along the chain.
    """

    src: SourceSpectra
    idler: np.ndarray
    signal: np.ndarray
    times: np.ndarray

    @property
    def d_idler(self) -> float:
        return self.idler[1] - self.idler[0]

    @property
    def d_signal(self) -> float:
        return self.signal[1] - self.signal[0]

    @property
    def dt(self) -> float:
        return self.times[1] - self.times[0]

    @classmethod
    def build(cls, src: SourceSpectra, n: int, level: int) -> "_QuadratureGrid":
        wf = src.filter.effective_width
        wp = src.pump.effective_width
        half_idler = 8 * wf
        half_signal = 8 * math.hypot(wf, wp)
        half_time = 8 * math.sqrt(1 / wf**2 + 1 / wp**2)
        if not src.filter.is_gaussian:
            lo, hi = src.filter.breakpoints[[0, -1]] - src.filter.center
            half_idler = max(abs(lo), abs(hi))
        if not src.pump.is_gaussian:
            lo, hi = src.pump.breakpoints[[0, -1]] - src.pump.center
            half_signal = max(half_signal, max(abs(lo), abs(hi)) + half_idler)
        m_freq = 48 * 2**level
        # time step resolves phases exp(-i w t) across twice the idler band
        m_time = int(math.ceil(2 * half_time * half_idler / math.pi)) * 2**level
        return cls(src,
                   np.linspace(-half_idler, half_idler, m_freq + 1),
                   np.linspace(-half_signal, half_signal, m_freq + 1),
                   np.linspace(-half_time, half_time, m_time + 1))

    def _trap(self, x: np.ndarray) -> np.ndarray:
        w = np.full(x.size, x[1] - x[0])
        w[[0, -1]] *= 0.5
        return w

    def g_matrix(self) -> np.ndarray:
        """g[s, t] on (signal grid, time grid), baseband."""
        src = self.src
        wi = self.idler + src.idler_reference
        ws = self.signal + src.signal_reference
        M = eval_frequency(src.pump, ws[:, None] + wi[None, :]) * eval_frequency(src.filter, wi)[None, :]
        E = np.exp(-1j * np.outer(self.idler, self.times))
        return (M * self._trap(self.idler)) @ E / TWO_PI

    def h_matrix(self) -> np.ndarray:
        """h[t, t'] on the time grid, baseband."""
        src = self.src
        wi = self.idler + src.idler_reference
        fw = eval_frequency(src.filter, wi) * self._trap(self.idler)
        M = eval_frequency(src.pump, wi[:, None] + wi[None, :]) * np.outer(fw, fw)
        E = np.exp(-1j * np.outer(self.times, self.idler))
        return E @ M @ E.T / TWO_PI**2

    def amplitudes(self, n: int) -> SwapAmplitudes:
        g = self.g_matrix()
        wt = self._trap(self.times)
        ws = self._trap(self.signal)
        # K[p, q] = int dw g(w, p) conj g(w, q)
        K = (g.T * ws) @ g.conj()
        norm_g = float(np.sum(np.abs(g) ** 2 * ws[:, None] * wt[None, :]))
        S = K
        norm_h = 1.0
        if n > 2:
            H = self.h_matrix()
            norm_h = float(np.sum(np.abs(H) ** 2 * np.outer(wt, wt)))
            W = np.outer(wt, wt)
            for _ in range(n - 2):
                # S'[p', q'] = sum_{p, q} S[p, q] h(q, p') conj h(p, q')
                S = H.T @ (S * W).T @ H.conj()
        a = np.sum(S * K.T * np.outer(wt, wt))
        b = norm_g**2 * norm_h ** (n - 2)
        return SwapAmplitudes(a, b, b)

    def three_source_cross_modulus(self) -> float:
        """int |int T1 conj(T2) dt_a dt_f| over the four internal times.

        With the output frequencies integrated the inner integral is
        K[t2, t1] h(t1, t4) conj h(t2, t3) K[t3, t4], so its modulus factorizes
        and the 4-D sum contracts without being stored.
        """
        g = self.g_matrix()
        H = np.abs(self.h_matrix())
        ws = self._trap(self.signal)
        K = np.abs((g.T * ws) @ g.conj())
        wt = self._trap(self.times)
        Kw = K * np.outer(wt, wt)
        Hw = H * np.outer(wt, wt)
        return float(np.einsum("ba,ad,bc,cd->", Kw, Hw, H, K, optimize=True))


def quadrature_amplitudes(config: ChainConfig) -> SwapAmplitudes:
    """Grid-quadrature amplitudes; ``error`` is the change in visibility under grid halving."""
    coarse = _QuadratureGrid.build(config.spectra, config.n, 1).amplitudes(config.n)
    fine = _QuadratureGrid.build(config.spectra, config.n, 2).amplitudes(config.n)
    err = abs(visibility(fine) - visibility(coarse))
    return SwapAmplitudes(fine.a, fine.b, fine.c, error=err)


# Monte-Carlo cross-check -------------------------------------------------------------------

def monte_carlo_coefficients(config: ChainConfig) -> dict[str, montecarlo.MCEstimate]:
    """Importance-sampled estimates of (F1234, G1234, G2143) over all six click times.

    The integrands are |T1 conj(T2)|, |T1|^2 and |T2|^2 evaluated pointwise.
    """
    _require_three(config)
    src = config.spectra
    wf = src.filter.effective_width
    wp = src.pump.effective_width
    tw = math.sqrt(1 / wf**2 + 1 / wp**2)
    cov = np.diag([1 / wp**2] * 2 + [tw**2] * 4)

    def pieces(x):
        outer = (x[:, 0], x[:, 1])
        inner = (x[:, 2], x[:, 3], x[:, 4], x[:, 5])
        return amplitude_T(config, "T1", outer, inner), amplitude_T(config, "T2", outer, inner)

    def cross(x):
        t1, t2 = pieces(x)
        return np.abs(t1 * np.conj(t2))

    def direct(which):
        def fn(x):
            t1, t2 = pieces(x)
            return np.abs(t1 if which == 0 else t2) ** 2
        return fn

    kw = dict(samples=config.samples, seed=config.seed, workers=config.workers)
    mean = np.zeros(6)
    return {
        "F1234": montecarlo.adaptive_integrate(cross, mean, cov, **kw),
        "G1234": montecarlo.adaptive_integrate(direct(0), mean, cov, **kw),
        "G2143": montecarlo.adaptive_integrate(direct(1), mean, cov, **kw),
    }
