"""Pump and filter spectra and the time-domain kernels built from them.

Conventions
-----------
Spectral amplitudes are functions of absolute angular frequency.  A Gaussian
profile is ``exp(-(w - center)**2 / (2 * sigma))`` with ``sigma`` *not*
squared (units rad^2/s^2), so the 1/e point of the amplitude sits at
``center + sqrt(2 * sigma)``.

Time-domain functions use

* ``pump_time(t)   = (1/2pi) * integral F(w) exp(-i w t) dw`` (the conjugated
  pump envelope that multiplies every amplitude integral), and
* ``filter_time(t) = (1/2pi) * integral f(w) exp(+i w t) dw``,

and the two detection kernels are

* ``g(w_s, t) = integral exp(i w_s u) pump_time(u) filter_time(u - t) du``
  (signal amplitude of an outer source whose filtered partner fired at ``t``),
* ``h(t1, t2) = integral pump_time(u) filter_time(u - t1) filter_time(u - t2) du``
  (amplitude of an inner source whose two filtered photons fired at t1, t2).

In the frequency domain these read ``g = (1/2pi) int dw f(w) F(w + w_s) e^{-i w t}``
and ``h = (1/2pi)^2 int dw dw' F(w + w') f(w) f(w') e^{-i(w t1 + w' t2)}``.

Baseband ("rotating frame") variants strip the optical carriers: filtered
photons are measured from the filter center ``w_c`` and output photons from
``w_0 - w_c``.  Every detection time appears exactly once in both halves of
the post-selected superposition, so the carriers cancel from all swap
integrals.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, NumericError
from .gaussform import ComplexQuadraticForm, marginalize

LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Complex spectral amplitude, Gaussian or piecewise-linear tabulated.

    Build instances with :meth:`gaussian` or :meth:`tabulated`.
    """

    kind: str
    center: float
    width: float | None = None
    table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "tabulated"):
            raise DomainError(f"unknown spectral profile kind {self.kind!r}")
        if not np.isfinite(self.center):
            raise DomainError("profile center must be finite")
        if self.kind == "gaussian":
            if self.width is None or not np.isfinite(self.width) or self.width <= 0:
                raise DomainError(f"gaussian width must be positive, got {self.width}")
        else:
            if self.table is None:
                raise DomainError("tabulated profile needs a (frequency, value) table")
            w = np.asarray(self.table[0], dtype=float)
            v = np.asarray(self.table[1], dtype=complex)
            if w.ndim != 1 or w.shape != v.shape or w.size < 2:
                raise DomainError("table must hold two equal-length 1-D arrays with at least 2 points")
            if np.any(np.diff(w) <= 0):
                raise DomainError("tabulated frequency grid must be strictly increasing")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
                raise DomainError("tabulated values must be finite")
            w.setflags(write=False)
            v.setflags(write=False)
            object.__setattr__(self, "table", (w, v))

    @classmethod
    def gaussian(cls, center: float, sigma: float) -> "SpectralProfile":
        return cls("gaussian", float(center), float(sigma))

    @classmethod
    def tabulated(cls, omega, values, center: float | None = None) -> "SpectralProfile":
        """Linear interpolation of ``values`` on ``omega``, zero outside the grid.

        ``center`` defaults to the centroid of ``|values|^2``.
        """
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=complex)
        if center is None:
            wts = np.abs(values) ** 2
            center = float(np.sum(omega * wts) / np.sum(wts)) if wts.sum() > 0 else float(omega.mean())
        return cls("tabulated", float(center), None, (omega, values))

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    def __call__(self, omega):
        return eval_frequency(self, omega)

    @property
    def breakpoints(self) -> np.ndarray:
        """Table nodes (tabulated) or an effectively exhaustive range (gaussian)."""
        if self.is_gaussian:
            s = np.sqrt(self.width)
            return np.array([self.center - 14 * s, self.center + 14 * s])
        return self.table[0]

    @cached_property
    def effective_width(self) -> float:
        """sqrt(2 Var) of the power spectrum |S|^2; equals sqrt(sigma) for a gaussian."""
        if self.is_gaussian:
            return float(np.sqrt(self.width))
        x, w = gauss_nodes(self.table[0], 16)
        p = np.abs(eval_frequency(self, x)) ** 2 * w
        m = np.sum(p * x) / np.sum(p)
        return float(np.sqrt(2 * np.sum(p * (x - m) ** 2) / np.sum(p)))


def eval_frequency(profile: SpectralProfile, omega):
    """Spectral amplitude at angular frequency ``omega`` (scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("frequency must be finite")
    if profile.is_gaussian:
        out = np.exp(-((w - profile.center) ** 2) / (2 * profile.width))
    else:
        grid, vals = profile.table
        out = np.interp(w, grid, vals.real, left=0.0, right=0.0) + 1j * np.interp(
            w, grid, vals.imag, left=0.0, right=0.0)
        if not np.any(vals.imag):
            out = out.real
    return out if np.ndim(out) else out.item()


@dataclass(frozen=True, eq=False)
class SourceSpectra:
    """Pump ``F`` and filter ``f`` shared by every source in a chain.

    The filter must sit at half the pump center; ``center_tolerance`` is
    relative to the pump center (absolute when the pump center is below 1).
    """

    pump: SpectralProfile
    filter: SpectralProfile
    center_tolerance: float = 1e-6

    def __post_init__(self):
        scale = max(1.0, abs(self.pump.center))
        if abs(self.filter.center - 0.5 * self.pump.center) > self.center_tolerance * scale:
            raise DomainError(
                f"filter center {self.filter.center} is not half the pump center {self.pump.center}")

    @classmethod
    def gaussian(cls, omega0: float, sigma: float, sigma_f: float) -> "SourceSpectra":
        return cls(SpectralProfile.gaussian(omega0, sigma), SpectralProfile.gaussian(omega0 / 2, sigma_f))

    @property
    def is_gaussian(self) -> bool:
        return self.pump.is_gaussian and self.filter.is_gaussian

    @property
    def idler_reference(self) -> float:
        return self.filter.center

    @property
    def signal_reference(self) -> float:
        return self.pump.center - self.filter.center

    @property
    def detuning(self) -> float:
        """2 w_c - w_0; zero for a perfectly centered filter."""
        return 2 * self.filter.center - self.pump.center

    # Baseband Gaussian forms -------------------------------------------------

    def _require_gaussian(self):
        if not self.is_gaussian:
            raise DomainError("closed-form kernels need gaussian pump and filter")

    def pump_time_form(self) -> ComplexQuadraticForm:
        """Baseband pump_time(t) as a 1-variable form (carrier exp(-i w0 t) removed)."""
        self._require_gaussian()
        # variables (delta, t): F(w0 + delta) exp(-i delta t) / 2pi
        sig = self.pump.width
        q = ComplexQuadraticForm([[1 / sig, 1j], [1j, 0.0]], [0, 0], -LOG_2PI)
        return marginalize(q, [0])

    def filter_time_form(self) -> ComplexQuadraticForm:
        """Baseband filter_time(t) as a 1-variable form (carrier exp(i w_c t) removed)."""
        self._require_gaussian()
        sig = self.filter.width
        q = ComplexQuadraticForm([[1 / sig, -1j], [-1j, 0.0]], [0, 0], -LOG_2PI)
        return marginalize(q, [0])

    def g_form(self) -> ComplexQuadraticForm:
        """Baseband g as a form in (signal detuning, detection time)."""
        P = self.pump_time_form()
        f = self.filter_time_form()
        # variables (delta_s, tau, u)
        pump = P.embed(3, [2])
        filt = ComplexQuadraticForm.along([0, -1, 1], f.A[0, 0], f.b[0], f.c)
        osc = ComplexQuadraticForm([[0, 0, -1j], [0, 0, 0], [-1j, 0, 0]], np.zeros(3), 0)
        return marginalize(pump * filt * osc, [2])

    def h_form(self) -> ComplexQuadraticForm:
        """Baseband h as a form in (t1, t2); keeps the residual detuning 2 w_c - w_0."""
        P = self.pump_time_form()
        f = self.filter_time_form()
        pump = ComplexQuadraticForm.along([0, 0, 1], P.A[0, 0], P.b[0] + 1j * self.detuning, P.c)
        f1 = ComplexQuadraticForm.along([-1, 0, 1], f.A[0, 0], f.b[0], f.c)
        f2 = ComplexQuadraticForm.along([0, -1, 1], f.A[0, 0], f.b[0], f.c)
        return marginalize(pump * f1 * f2, [2])


# Piecewise quadrature ---------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def gauss_nodes(breaks, order: int, subdivide: int = 1):
    """Composite Gauss-Legendre nodes and weights on the segments between ``breaks``."""
    b = gauss_breaks(breaks, subdivide)
    x0, w0 = _gl(order)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    return ((lo + hi) * 0.5 + half * x0).ravel(), (half * w0).ravel()


def gauss_breaks(breaks, subdivide: int) -> np.ndarray:
    """Breakpoints with every segment split into ``subdivide`` equal parts."""
    b = np.unique(np.asarray(breaks, dtype=float))
    if subdivide <= 1:
        return b
    return np.unique(np.concatenate([np.linspace(lo, hi, subdivide + 1) for lo, hi in zip(b[:-1], b[1:])]))


def piecewise_integral(func, breaks, tol: float = 1e-10, order: int = 12, max_subdivide: int = 4096):
    """Integrate ``func(x) -> (..., len(x))`` over the span of ``breaks``.

    The integrand is assumed smooth between breakpoints.  Segments are split
    until two Gauss orders agree to ``tol`` relative to the result scale.
    """
    sub = 1
    while True:
        x, w = gauss_nodes(breaks, order, sub)
        lo = func(x) @ w
        x2, w2 = gauss_nodes(breaks, 2 * order, sub)
        hi = func(x2) @ w2
        err = np.max(np.abs(hi - lo))
        scale = max(np.max(np.abs(hi)), 1e-300)
        if err <= tol * scale:
            return hi
        if sub >= max_subdivide:
            raise NumericError("piecewise quadrature did not converge", residual=float(err / scale))
        sub *= 2


def _oscillation_subdivisions(breaks, times) -> int:
    span = np.max(np.diff(np.unique(breaks))) if len(breaks) > 1 else 1.0
    tmax = float(np.max(np.abs(times))) if np.size(times) else 0.0
    return int(min(4096, 2 ** np.ceil(np.log2(1 + span * tmax / 8))))


# Time-domain kernels (absolute frame) -------------------------------------------

def pump_time(src: SourceSpectra, t):
    """(1/2pi) int F(w) exp(-i w t) dw, the conjugated pump envelope in time."""
    t = np.asarray(t, dtype=float)
    if src.pump.is_gaussian:
        P = src.pump_time_form()
        out = np.exp(-0.5 * P.A[0, 0] * t**2 + P.b[0] * t + P.c) * np.exp(-1j * src.pump.center * t)
    else:
        tf = t.ravel()
        bp = src.pump.breakpoints
        out = piecewise_integral(lambda w: np.exp(-1j * np.outer(tf, w)) * eval_frequency(src.pump, w),
                                 bp, order=8, max_subdivide=8192) / (2 * np.pi)
        out = out.reshape(t.shape)
    return out if np.ndim(out) else complex(out)


def filter_time(src: SourceSpectra, t):
    """(1/2pi) int f(w) exp(+i w t) dw."""
    t = np.asarray(t, dtype=float)
    if src.filter.is_gaussian:
        f = src.filter_time_form()
        out = np.exp(-0.5 * f.A[0, 0] * t**2 + f.b[0] * t + f.c) * np.exp(1j * src.filter.center * t)
    else:
        tf = t.ravel()
        out = piecewise_integral(lambda w: np.exp(1j * np.outer(tf, w)) * eval_frequency(src.filter, w),
                                 src.filter.breakpoints, order=8, max_subdivide=8192) / (2 * np.pi)
        out = out.reshape(t.shape)
    return out if np.ndim(out) else complex(out)


def g_kernel(src: SourceSpectra, omega_s, t_det, tol: float = 1e-10):
    """g(w_s, t): signal amplitude of an outer source whose partner fired at ``t_det``.

    Gaussian spectra use the closed form; tabulated spectra are integrated in
    the frequency domain with breakpoints at every table node.
    """
    ws, td = np.broadcast_arrays(np.asarray(omega_s, float), np.asarray(t_det, float))
    if not (np.all(np.isfinite(ws)) and np.all(np.isfinite(td))):
        raise DomainError("g_kernel arguments must be finite")
    if src.is_gaussian:
        q = src.g_form()
        x = np.stack([ws.ravel() - src.signal_reference, td.ravel()], axis=-1)
        out = q(x) * np.exp(-1j * src.idler_reference * td.ravel())
    else:
        out = np.empty(ws.size, dtype=complex)
        for k, (w_s, tau) in enumerate(zip(ws.ravel(), td.ravel())):
            bp = np.concatenate([src.filter.breakpoints, src.pump.breakpoints - w_s])
            lo, hi = max(src.filter.breakpoints[0], src.pump.breakpoints[0] - w_s), \
                min(src.filter.breakpoints[-1], src.pump.breakpoints[-1] - w_s)
            if lo >= hi:
                out[k] = 0.0
                continue
            bp = np.clip(bp, lo, hi)
            sub = _oscillation_subdivisions(bp, [tau])

            def integrand(w, w_s=w_s, tau=tau):
                return eval_frequency(src.filter, w) * eval_frequency(src.pump, w + w_s) * np.exp(-1j * w * tau)

            out[k] = piecewise_integral(integrand, gauss_breaks(bp, sub), tol=tol) / (2 * np.pi)
    out = out.reshape(ws.shape)
    return out if np.ndim(out) else complex(out)


def h_kernel(src: SourceSpectra, t1, t2, tol: float = 1e-9):
    """h(t1, t2): amplitude of an inner source whose photons fired at t1 and t2."""
    a, b = np.broadcast_arrays(np.asarray(t1, float), np.asarray(t2, float))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("h_kernel arguments must be finite")
    if src.is_gaussian:
        q = src.h_form()
        out = q(np.stack([a.ravel(), b.ravel()], axis=-1)) * np.exp(-1j * src.idler_reference * (a + b).ravel())
    else:
        out = _h_tabulated(src, a.ravel(), b.ravel(), tol)
    out = out.reshape(a.shape)
    return out if np.ndim(out) else complex(out)


_H_CLOUDS: "weakref.WeakKeyDictionary[SourceSpectra, dict]" = weakref.WeakKeyDictionary()


def _h_cloud(src: SourceSpectra, order: int, sub: int):
    """Nodes (x, y) and weights W with h(t1, t2) = sum W exp(-i(x t1 + y t2)).

    The outer variable is the first photon's frequency.  For each outer node
    the inner rule breaks at filter nodes and at pump nodes shifted by the
    outer frequency, so the inner integrand is smooth on every segment.
    """
    cache = _H_CLOUDS.setdefault(src, {})
    key = (order, sub)
    if key in cache:
        return cache[key]
    fb = src.filter.breakpoints
    pb = src.pump.breakpoints
    if fb.size * pb.size <= 4096:
        outer_bp = np.unique(np.concatenate([fb, (pb[:, None] - fb[None, :]).ravel()]))
        outer_bp = outer_bp[(outer_bp >= fb[0]) & (outer_bp <= fb[-1])]
    else:
        # dense tables: the kinks are tiny, let refinement absorb them
        outer_bp = fb
    x1, w1 = gauss_nodes(outer_bp, order, sub)
    w1 = w1 * eval_frequency(src.filter, x1)
    xs, ys, ws = [], [], []
    for a, wa in zip(x1, w1):
        if wa == 0:
            continue
        bp = np.concatenate([fb, pb - a])
        bp = bp[(bp >= fb[0]) & (bp <= fb[-1])]
        y, wy = gauss_nodes(bp, order, sub)
        wt = wa * wy * eval_frequency(src.pump, a + y) * eval_frequency(src.filter, y)
        nz = wt != 0
        xs.append(np.full(nz.sum(), a))
        ys.append(y[nz])
        ws.append(wt[nz])
    cloud = (np.concatenate(xs), np.concatenate(ys), np.concatenate(ws).astype(complex) / (2 * np.pi) ** 2)
    cache[key] = cloud
    return cloud


def _eval_cloud(cloud, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    x, y, w = cloud
    out = np.empty(t1.size, dtype=complex)
    step = max(1, int(2e7 // max(x.size, 1)))
    for s in range(0, t1.size, step):
        ph = np.outer(t1[s:s + step], x) + np.outer(t2[s:s + step], y)
        out[s:s + step] = np.exp(-1j * ph) @ w
    return out


def _h_tabulated(src: SourceSpectra, t1: np.ndarray, t2: np.ndarray, tol: float) -> np.ndarray:
    sub = _oscillation_subdivisions(src.filter.breakpoints, np.concatenate([t1, t2]))
    # segments of dense tables are short, so low orders already resolve them
    order = 3 if src.filter.breakpoints.size > 64 else 6
    while True:
        lo = _eval_cloud(_h_cloud(src, order, sub), t1, t2)
        hi = _eval_cloud(_h_cloud(src, 2 * order, sub), t1, t2)
        scale = max(np.max(np.abs(hi)), 1e-300)
        err = np.max(np.abs(hi - lo)) / scale
        if err <= tol:
            return hi
        if sub >= 16:
            raise NumericError("tabulated h quadrature did not converge", residual=float(err))
        sub *= 2
