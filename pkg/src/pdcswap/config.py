"""Run configuration: INI-style files with [chain], [spectra], [integration], [grid], [output].

Example::

    [chain]
    n = 3
    phase_a = 0.0
    phase_f = 0.0

    [spectra]
    pump_center = 10.0
    pump_sigma = 1.0
    filter_sigma = 0.1

    [integration]
    method = analytic

Every error carries the line of the offending key.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import ChainConfig, MaximallyCorrelatedState
from .errors import ConfigError, SwapError
from .oracle import FockGrid
from .spectra import SourceSpectra, SpectralProfile

SECTIONS = ("chain", "spectra", "integration", "grid", "output")
KNOWN_KEYS = {
    "chain": {"n", "phase_a", "phase_f", "visibility", "p00", "p11", "r"},
    "spectra": {"pump_kind", "pump_center", "pump_sigma", "pump_table", "filter_kind", "filter_center",
                "filter_sigma", "filter_table", "center_tolerance"},
    "integration": {"method", "tolerance", "samples", "seed", "workers"},
    "grid": {"bins", "widths", "tolerance"},
    "output": {"format", "path"},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass(frozen=True)
class RunConfig:
    chain: ChainConfig | None
    state: MaximallyCorrelatedState | None
    grid_bins: int
    grid_widths: float
    verify_tolerance: float
    output_format: str
    output_path: str | None
    source: str

    def grid(self) -> FockGrid:
        if self.chain is None:
            raise ConfigError("a frequency grid needs [spectra]", path=self.source)
        return FockGrid.for_spectra(self.chain.spectra, self.grid_bins, self.grid_widths)


class _Located:
    """Values of a parsed file plus the line of every section and key."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.lines: dict[tuple[str, str | None], int] = {}
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            m = _SECTION_RE.match(raw)
            if m:
                section = m.group(1).strip().lower()
                self.lines.setdefault((section, None), lineno)
                continue
            m = _KEY_RE.match(raw)
            if m and section is not None and not raw[:1].isspace():
                self.lines.setdefault((section, m.group(1).strip().lower()), lineno)
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}", line=getattr(exc, "lineno", None),
                              path=path) from None
        self.parser = parser
        for sec in parser.sections():
            if sec.lower() not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]", line=self.lines.get((sec.lower(), None)), path=path)
            for key in parser[sec]:
                if key not in KNOWN_KEYS[sec.lower()]:
                    raise ConfigError(f"unknown key '{key}' in [{sec}]", line=self.lines.get((sec.lower(), key)),
                                      path=path)

    def line(self, section: str, key: str | None = None) -> int | None:
        return self.lines.get((section, key), self.lines.get((section, None)))

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        return ConfigError(message, line=self.line(section, key), path=self.path)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None):
        if not self.has(section, key):
            return default
        return self.parser.get(section, key).strip()

    def number(self, section: str, key: str, default=None, kind=float, check=None, rule: str = ""):
        text = self.raw(section, key)
        if text is None:
            if default is None:
                raise self.error(section, key, f"missing required key '{key}' in [{section}]")
            return default
        try:
            value = kind(text)
        except ValueError:
            raise self.error(section, key, f"{key} = {text!r} is not a valid {kind.__name__}") from None
        if kind is float and not np.isfinite(value):
            raise self.error(section, key, f"{key} must be finite")
        if check is not None and not check(value):
            raise self.error(section, key, f"{key} = {text} violates: {rule}")
        return value

    def choice(self, section: str, key: str, options: tuple[str, ...], default: str) -> str:
        value = (self.raw(section, key) or default).lower()
        if value not in options:
            raise self.error(section, key, f"{key} must be one of {', '.join(options)}, got {value!r}")
        return value


def _profile(cfg: _Located, prefix: str, center: float, base: Path) -> SpectralProfile:
    kind = cfg.choice("spectra", f"{prefix}_kind", ("gaussian", "tabulated"), "gaussian")
    if kind == "gaussian":
        sigma = cfg.number("spectra", f"{prefix}_sigma", check=lambda v: v > 0, rule="width must be positive")
        return SpectralProfile.gaussian(center, sigma)
    key = f"{prefix}_table"
    name = cfg.raw("spectra", key)
    if name is None:
        raise cfg.error("spectra", key, f"tabulated {prefix} needs '{key}'")
    path = (base / name) if not Path(name).is_absolute() else Path(name)
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise cfg.error("spectra", key, f"cannot read table {path}: {exc}") from None
    if data.shape[1] not in (2, 3):
        raise cfg.error("spectra", key, "table needs columns omega, real[, imag]")
    values = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0)
    try:
        return SpectralProfile.tabulated(data[:, 0], values, center=center)
    except SwapError as exc:
        raise cfg.error("spectra", key, str(exc)) from None


def _spectra(cfg: _Located, base: Path) -> SourceSpectra:
    w0 = cfg.number("spectra", "pump_center")
    wc = cfg.number("spectra", "filter_center", default=w0 / 2)
    tol = cfg.number("spectra", "center_tolerance", default=1e-6, check=lambda v: v > 0, rule="must be positive")
    pump = _profile(cfg, "pump", w0, base)
    filt = _profile(cfg, "filter", wc, base)
    try:
        return SourceSpectra(pump, filt, tol)
    except SwapError as exc:
        raise cfg.error("spectra", "filter_center", f"invariant violated: {exc}") from None


def _synthetic_state(cfg: _Located) -> MaximallyCorrelatedState | None:
    if cfg.has("chain", "visibility"):
        v = cfg.number("chain", "visibility", check=lambda x: 0 <= x <= 1, rule="visibility must lie in [0, 1]")
        return MaximallyCorrelatedState.from_visibility(v)
    if any(cfg.has("chain", k) for k in ("p00", "p11", "r")):
        p00 = cfg.number("chain", "p00")
        p11 = cfg.number("chain", "p11", default=1 - p00)
        r = cfg.number("chain", "r")
        try:
            return MaximallyCorrelatedState(p00, p11, r)
        except SwapError as exc:
            raise cfg.error("chain", "r", f"invariant violated: {exc}") from None
    return None


def parse_config(text: str, path: str = "<config>", base: Path | None = None) -> RunConfig:
    cfg = _Located(text, path)
    base = base or Path(".")
    state = _synthetic_state(cfg)
    chain = None
    if cfg.parser.has_section("spectra") or state is None:
        if not cfg.parser.has_section("spectra"):
            raise ConfigError("configuration needs a [spectra] section or a synthetic state in [chain]", path=path)
        n = cfg.number("chain", "n", kind=int, check=lambda v: v >= 2, rule="chain needs n >= 2 sources")
        spectra = _spectra(cfg, base)
        method = cfg.choice("integration", "method", ("analytic", "quadrature"), "analytic")
        if method == "analytic" and not spectra.is_gaussian:
            raise cfg.error("integration", "method", "analytic integration needs gaussian pump and filter")
        try:
            chain = ChainConfig(
                n=n, spectra=spectra,
                phase_a=cfg.number("chain", "phase_a", default=0.0),
                phase_f=cfg.number("chain", "phase_f", default=0.0),
                integration=method,
                tolerance=cfg.number("integration", "tolerance", default=1e-8, check=lambda v: v > 0,
                                     rule="must be positive"),
                samples=cfg.number("integration", "samples", default=10**6, kind=int, check=lambda v: v > 0,
                                   rule="must be positive"),
                seed=cfg.number("integration", "seed", default=0, kind=int, check=lambda v: v >= 0,
                                rule="must be nonnegative"),
                workers=cfg.number("integration", "workers", default=1, kind=int, check=lambda v: v >= 1,
                                   rule="must be at least 1"),
            )
        except SwapError as exc:
            raise cfg.error("chain", "n", f"invariant violated: {exc}") from None
    fmt = cfg.choice("output", "format", ("json", "csv"), "json")
    return RunConfig(
        chain=chain,
        state=state,
        grid_bins=cfg.number("grid", "bins", default=32, kind=int, check=lambda v: v >= 2, rule="need at least 2 bins"),
        grid_widths=cfg.number("grid", "widths", default=6.0, check=lambda v: v > 0, rule="must be positive"),
        verify_tolerance=cfg.number("grid", "tolerance", default=0.01, check=lambda v: v > 0, rule="must be positive"),
        output_format=fmt,
        output_path=cfg.raw("output", "path"),
        source=path,
    )


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}", path=str(p)) from None
    return parse_config(text, str(p), p.parent)
