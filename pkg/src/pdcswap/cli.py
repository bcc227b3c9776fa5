"""Command-line interface: visibility, state, sweep, verify and correlation runs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from . import oracle, twoqubit
from .config import RunConfig, load_config
from .errors import ConfigError, DomainError, NumericError, ResolutionError, SwapError
from .spectra import SpectralProfile, SourceSpectra

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4

SWEEP_PARAMETERS = ("visibility", "sigma", "sigma_f", "n")


class VerificationFailed(SwapError):
    def __init__(self, report: dict):
        super().__init__(report.get("diagnostic", "verification failed"))
        self.report = report


# Formatting --------------------------------------------------------------------------------

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj) -> str:
    """JSON with 17-significant-digit floats and insertion-ordered keys."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise NumericError(f"non-finite value {obj} in report")
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


def report_to_csv(report: dict) -> str:
    """Flatten a report into key,value rows."""
    rows = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(value, (list, tuple)):
            for k, v in enumerate(value):
                walk(f"{prefix}[{k}]", v)
        else:
            rows.append([prefix, value if not isinstance(value, bool) else str(value).lower()])

    walk("", report)
    return to_csv(["key", "value"], [[k, fmt_float(v) if isinstance(v, float) else v] for k, v in rows])


def emit(text: str, run: RunConfig | None, out=None):
    path = run.output_path if run is not None else None
    if path:
        Path(path).write_text(text, newline="\n")
    else:
        (out or sys.stdout).write(text)


def emit_report(report: dict, run: RunConfig | None, out=None):
    fmt = run.output_format if run is not None else "json"
    emit(_encode(report) + "\n" if fmt == "json" else report_to_csv(report), run, out)


# Reports -------------------------------------------------------------------------------------

def _require_chain(run: RunConfig) -> chain_mod.ChainConfig:
    if run.chain is None:
        raise ConfigError("this command needs [spectra] and [chain] n", path=run.source)
    return run.chain


def visibility_report(cfg: chain_mod.ChainConfig) -> dict:
    amps = chain_mod.swap_amplitudes(cfg)
    report = {
        "n": cfg.n,
        "r_a": amps.r_a,
        "b": amps.b,
        "c": amps.c,
        "visibility": chain_mod.visibility(amps),
        "theta_a": amps.theta_a,
        "method": cfg.integration,
    }
    if cfg.integration == "quadrature":
        report["visibility_error"] = amps.error
    return report


def state_metrics(state: twoqubit.TwoQubitState) -> dict:
    """All entanglement and Bell metrics, computed from the density matrix alone."""
    rho = state.rho
    T = twoqubit.correlation_tensor(state)
    conc = twoqubit.concurrence(state)
    pt_min, entangled = twoqubit.partial_transpose_test(state)
    weights = twoqubit.bell_mixture_weights(state)
    return {
        "density_matrix": [[float(z.real), float(z.imag)] for z in rho.ravel()],
        "concurrence": conc,
        "entanglement_of_formation": float(twoqubit.entanglement_of_formation(min(conc, 1.0))),
        "max_bell_violation": twoqubit.max_bell_violation(state),
        "pt_min_eigenvalue": pt_min,
        "entangled": entangled,
        "plane_xy": twoqubit.plane_criterion(T, "xy"),
        "plane_xz": twoqubit.plane_criterion(T, "xz"),
        "bell_mixture_weights": list(weights) if weights is not None else None,
    }


def _consistency(metrics: dict, v: float, tol: float = 1e-9) -> bool:
    """Metrics of a maximally correlated state all follow from its visibility."""
    checks = [abs(metrics["concurrence"] - v) <= tol,
              abs(metrics["entanglement_of_formation"] - float(twoqubit.entanglement_of_formation(v))) <= tol]
    if metrics["bell_mixture_weights"] is not None:
        checks.append(abs(metrics["max_bell_violation"] - 2 * math.sqrt(1 + v * v)) <= tol)
        checks.append(abs(metrics["plane_xy"] - 2 * v * v) <= tol)
    return all(checks)


def state_report(run: RunConfig) -> dict:
    report: dict = {}
    if run.state is not None and run.chain is None:
        s = run.state
        report["source"] = "synthetic"
    else:
        cfg = _require_chain(run)
        amps = chain_mod.swap_amplitudes(cfg)
        s = chain_mod.output_state(amps)
        report.update(n=cfg.n, r_a=amps.r_a, b=amps.b, c=amps.c, theta_a=amps.theta_a)
        report["source"] = "chain"
    v = s.visibility
    report.update(p00=s.p00, p11=s.p11, r=s.r, visibility=v)
    metrics = state_metrics(twoqubit.to_density_matrix(s))
    report.update(metrics)
    report["consistent"] = _consistency(metrics, v)
    return report


def state_report_from_json(path: str) -> dict:
    """Recompute metrics from the density matrix stored in an earlier state report."""
    try:
        data = json.loads(Path(path).read_text())
        pairs = np.asarray(data["density_matrix"], dtype=float)
        rho = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(4, 4)
    except (OSError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"cannot read state report: {exc}", path=path) from None
    metrics = state_metrics(twoqubit.TwoQubitState(rho))
    v = 2 * abs(rho[0, 3]) / (rho[0, 0].real + rho[3, 3].real)
    return {"source": "reingested", "visibility": float(v), **metrics}


def _sweep_values(start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ConfigError("sweep needs at least one step")
    return np.linspace(start, stop, steps + 1)


def _sweep_point(run: RunConfig, param: str, value: float) -> list:
    if param == "visibility":
        v = float(value)
    else:
        cfg = _require_chain(run)
        src = cfg.spectra
        if param == "n":
            cfg = replace(cfg, n=int(round(value)))
        else:
            if not src.is_gaussian:
                raise ConfigError(f"sweeping {param} needs gaussian spectra", path=run.source)
            pump, filt = src.pump, src.filter
            if param == "sigma":
                pump = SpectralProfile.gaussian(pump.center, value)
            else:
                filt = SpectralProfile.gaussian(filt.center, value)
            cfg = replace(cfg, spectra=SourceSpectra(pump, filt, src.center_tolerance))
        v = chain_mod.visibility(chain_mod.swap_amplitudes(cfg))
    state = twoqubit.to_density_matrix(chain_mod.MaximallyCorrelatedState.from_visibility(min(v, 1.0)))
    e = float(twoqubit.entanglement_of_formation(v))
    b = twoqubit.max_bell_violation(state)
    return [float(v), e, b] if param == "visibility" else [float(value), float(v), e, b]


def sweep_table(run: RunConfig, param: str, start: float, stop: float, steps: int, workers: int = 1) -> str:
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}")
    values = _sweep_values(start, stop, steps)
    if param == "visibility" and (values.min() < 0 or values.max() > 1):
        raise ConfigError("visibility sweep must stay inside [0, 1]")
    if param == "n" and (np.any(np.abs(values - np.round(values)) > 1e-9) or values.min() < 2):
        raise ConfigError("n sweep needs integer values >= 2")
    if param in ("sigma", "sigma_f") and values.min() <= 0:
        raise ConfigError(f"{param} sweep needs positive values")
    # pool.map returns results in input order regardless of completion order
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda x: _sweep_point(run, param, x), values))
    header = ["V", "E", "B"] if param == "visibility" else [param, "V", "E", "B"]
    return to_csv(header, rows)


def verify_report(run: RunConfig) -> dict:
    cfg = _require_chain(run)
    if cfg.n > oracle.MAX_SOURCES:
        raise ConfigError(f"verify supports n <= {oracle.MAX_SOURCES}", path=run.source)
    v_chain = chain_mod.visibility(chain_mod.swap_amplitudes(cfg))
    grid = run.grid()
    report = {"n": cfg.n, "analytic_visibility": v_chain, "bins": grid.bins, "tolerance": run.verify_tolerance}
    try:
        v1 = oracle.oracle_visibility(cfg, grid)
        v2 = oracle.oracle_visibility(cfg, grid.refined())
    except ResolutionError as exc:
        report.update(passed=False, diagnostic=f"grid too coarse: {exc}")
        raise VerificationFailed(report) from None
    rel1 = abs(v1 - v_chain) / v_chain if v_chain else abs(v1)
    rel2 = abs(v2 - v_chain) / v_chain if v_chain else abs(v2)
    report.update(
        oracle_visibility=v1, oracle_visibility_refined=v2, refined_bins=2 * grid.bins,
        abs_difference=abs(v1 - v_chain), rel_difference=rel1,
        abs_difference_refined=abs(v2 - v_chain), rel_difference_refined=rel2,
        refinement_change=abs(v2 - v1),
    )
    passed = rel1 <= run.verify_tolerance and rel2 <= run.verify_tolerance
    report["passed"] = passed
    if not passed:
        report["diagnostic"] = (f"oracle and analytic visibility differ by {rel1:.3g} (M={grid.bins}) and "
                                f"{rel2:.3g} (M={2 * grid.bins}), tolerance {run.verify_tolerance:.3g}")
        raise VerificationFailed(report)
    return report


def correlation_table(run: RunConfig, dt_max: float, points: int) -> str:
    cfg = _require_chain(run)
    if points < 2 or dt_max <= 0:
        raise ConfigError("correlation needs --points >= 2 and --dt-max > 0")
    dts = np.linspace(-dt_max, dt_max, points)
    vals = oracle.pair_time_correlation(cfg.spectra, dts)
    return to_csv(["dt", "correlation"], [[float(a), float(b)] for a, b in zip(dts, vals)])


# Entry point ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdcswap", description="Entanglement-swapping chain simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("visibility", help="swap amplitudes and fringe visibility")
    p.add_argument("config")

    p = sub.add_parser("state", help="output state and its entanglement metrics")
    p.add_argument("config", nargs="?")
    p.add_argument("--state-json", help="recompute metrics from a previously emitted state report")

    p = sub.add_parser("sweep", help="CSV table of visibility, entanglement of formation and CHSH maximum")
    p.add_argument("config", nargs="?")
    p.add_argument("--param", choices=SWEEP_PARAMETERS, default="visibility")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", help="compare analytic visibility with the brute-force oracle")
    p.add_argument("config")

    p = sub.add_parser("correlation", help="pair detection-time correlation of the filters")
    p.add_argument("config")
    p.add_argument("--dt-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=41)
    return parser


def run(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    rc: RunConfig | None = None
    try:
        if args.command == "state" and args.state_json:
            emit_report(state_report_from_json(args.state_json), None, out)
            return EXIT_OK
        if getattr(args, "config", None) is None:
            if args.command == "sweep" and args.param == "visibility":
                emit(sweep_table(None, args.param, args.start, args.stop, args.steps, args.workers), None, out)
                return EXIT_OK
            raise ConfigError(f"{args.command} needs a configuration file")
        rc = load_config(args.config)
        if args.command == "visibility":
            emit_report(visibility_report(_require_chain(rc)), rc, out)
        elif args.command == "state":
            emit_report(state_report(rc), rc, out)
        elif args.command == "sweep":
            emit(sweep_table(rc, args.param, args.start, args.stop, args.steps, args.workers), rc, out)
        elif args.command == "verify":
            emit_report(verify_report(rc), rc, out)
        elif args.command == "correlation":
            emit(correlation_table(rc, args.dt_max, args.points), rc, out)
        return EXIT_OK
    except VerificationFailed as exc:
        emit_report(exc.report, rc, out)
        err.write(f"verification failed: {exc}\n")
        return EXIT_VERIFY
    except (ConfigError, DomainError) as exc:
        err.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except NumericError as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SwapError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
