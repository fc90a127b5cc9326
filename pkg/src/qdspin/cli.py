"""Command-line front end.

Exit codes: 0 success, 1 validation or solver failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import svg
from .config import Config, ConfigError, format_config, load_config
from .experiments import (CalibrationError, NoFringeError, RabiScan, RamseyScan, SU2Scan,
                          SweepError, SweepResult, amplitude_grid, delay_grid,
                          fringe_analysis, map_periods, run_rabi, run_ramsey, run_su2_map)
from .lindblad import IntegrationError
from .model import Geometry
from .qmath import DegenerateFitError
from .validation import run_checks
from .zeeman import (BRANCHES, FieldConfig, ZeemanFit, read_branches_csv, solve_g_tensors,
                     transition_energies)
from .zeeman import fit_zeeman as fit_branches

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("qdspin")


class UsageError(Exception):
    pass


def _num(x) -> str:
    return repr(float(x))


def write_sweep_csv(result: SweepResult, path) -> None:
    """Header row plus one row per grid point, shortest round-trip decimals."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_num(v) for v in row])


def write_metadata(result: SweepResult, path) -> None:
    doc = {"columns": list(result.columns), "params": result.params,
           "metadata": result.metadata}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default)
                          + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def read_sweep_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return tuple(rows[0]), np.array([[float(v) for v in r] for r in rows[1:]])


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config.preset(args.geometry)
    if args.config and args.geometry_given:
        raise UsageError("--geometry and --config are mutually exclusive")
    return cfg


def _emit(result: SweepResult, args, plot) -> None:
    out = Path(args.out)
    write_sweep_csv(result, out)
    if args.metadata:
        write_metadata(result, args.metadata)
    if args.svg:
        Path(args.svg).write_text(plot(result), encoding="utf-8")
    print(f"wrote {len(result.rows)} rows to {out}")


def _line(xcol, xlabel, title):
    def plot(result):
        return svg.line_plot(result.column(xcol), result.counts, xlabel,
                             "counts (photons per window)", title)
    return plot


def cmd_preset(args) -> int:
    text = format_config(Config.preset(args.geometry))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rabi(args) -> int:
    cfg = _config(args)
    s = cfg.scan
    points = args.points or s.rabi_points
    scan = RabiScan(cfg.model, amplitude_grid(points, s.omega_max), s.rabi_cw_scale,
                    s.pulse_t0)
    result = run_rabi(scan, workers=args.threads)
    _emit(result, args, _line("omega_p_GHz", "pulse amplitude Omega_p/2pi (GHz)",
                              f"Rabi scan, {cfg.model.geometry.value}"))
    return EXIT_OK


def cmd_ramsey(args) -> int:
    cfg = _config(args)
    s = cfg.scan
    step = args.delay_step or s.delay_step
    span = s.ramsey_span if args.span is None else args.span
    omega = args.omega_p if args.omega_p is not None else s.ramsey_omega_p
    scan = RamseyScan(cfg.model, omega, delay_grid(0.0, span, step), s.ramsey_cw_scale,
                      s.pulse_t0)
    result = run_ramsey(scan, workers=args.threads)
    meta = result.metadata
    print(f"pulse amplitude {meta['omega_p_GHz']:.6g} GHz ({meta['calibration']})")
    if meta["overlapping_delays_ps"]:
        print(f"flag: overlapping pulses for tau <= {max(meta['overlapping_delays_ps']):g} ps")
    try:
        fit = fringe_analysis(result)
        print(f"fringe: f = {fit.frequency:.4f} GHz, phase = {fit.phase:.4f} rad, "
              f"visibility = {fit.visibility:.4g}, decay = {fit.decay:.4g} ns")
    except NoFringeError as exc:
        print(f"fringe: {exc}")
    _emit(result, args, _line("tau_ps", "pulse delay tau (ps)",
                              f"Ramsey scan, {cfg.model.geometry.value}"))
    return EXIT_OK


def cmd_su2map(args) -> int:
    cfg = _config(args)
    s = cfg.scan
    points = args.points or s.su2_points
    step = args.delay_step or s.delay_step
    lo = s.su2_delay_min if args.delay_min is None else args.delay_min
    hi = s.su2_delay_max if args.delay_max is None else args.delay_max
    if hi < lo:
        raise UsageError("--delay-max must not be below --delay-min")
    scan = SU2Scan(cfg.model, amplitude_grid(points, s.omega_max), delay_grid(lo, hi - lo, step),
                   s.su2_cw_scale, s.pulse_t0)
    result = run_su2_map(scan, workers=args.threads)
    if len(scan.delays_ps) >= 8:
        periods = map_periods(result)
        found = periods[np.isfinite(periods)]
        if found.size:
            print(f"row autocorrelation period: median {np.median(found):.3f} ps "
                  f"({found.size} of {periods.size} rows)")
        else:
            print("row autocorrelation period: none found")

    def plot(res):
        om = np.unique(res.column("omega_p_GHz"))
        tau = np.unique(res.column("tau_ps"))
        return svg.heatmap(tau, om, res.grid(), "pulse delay tau (ps)",
                           "pulse amplitude Omega_p/2pi (GHz)", "counts",
                           f"control map, {cfg.model.geometry.value}")

    _emit(result, args, plot)
    return EXIT_OK


def cmd_zeeman(args) -> int:
    cfg = _config(args)
    if args.b_max < 0 or args.steps < 2:
        raise UsageError("need --b-max >= 0 and --steps >= 2")
    theta = cfg.model.theta_field if args.theta is None else args.theta
    fields = np.linspace(0.0, args.b_max, args.steps)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B_tesla"] + [f"E_{se:+d}{sh:+d}_ueV" for se, sh in BRANCHES])
        for b in fields:
            e = transition_energies(cfg.zeeman, FieldConfig(float(b), theta))
            w.writerow([_num(b)] + [_num(e[br]) for br in BRANCHES])
    print(f"wrote {len(fields)} rows to {args.out}")
    return EXIT_OK


def _report(fit: ZeemanFit, label="") -> str:
    return (f"{label}E0 = {fit.E0:.6f} ueV\n{label}gamma = {fit.gamma_dia:.6f} ueV/T^2\n"
            f"{label}g_e_eff = {fit.g_e:.6f}\n{label}g_h_eff = {fit.g_h:.6f}\n"
            f"{label}rms residual = {fit.rms:.6g} ueV\n")


def cmd_fit_zeeman(args) -> int:
    fit = fit_branches(read_branches_csv(args.input))
    text = _report(fit)
    if args.paired:
        if args.paired_theta is None:
            raise UsageError("--paired needs --paired-theta")
        fit2 = fit_branches(read_branches_csv(args.paired))
        e, h = solve_g_tensors(fit, args.theta, fit2, args.paired_theta)
        text += _report(fit2, "paired ")
        text += (f"electron gF = {e.gF:.6f}, gV = {e.gV:.6f}\n"
                 f"hole gF = {h.gF:.6f}, gV = {h.gV:.6f}\n")
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    results = run_checks(cfg)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}  "
              f"({r.seconds:.2f} s)")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in "
          f"{time.perf_counter() - start:.1f} s")
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_FAILURE
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _geometry_arg(p):
    p.add_argument("--geometry", choices=[g.value for g in Geometry], default=None,
                   help="preset to use when no --config is given (default oblique)")
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")


def _sweep_args(p, svg_help):
    _geometry_arg(p)
    p.add_argument("--out", required=True, metavar="PATH", help="CSV output")
    p.add_argument("--svg", metavar="PATH", help=svg_help)
    p.add_argument("--metadata", metavar="PATH",
                   help="JSON side file with the parameter snapshot and run notes")
    p.add_argument("--threads", type=int, default=None, metavar="N",
                   help="worker threads (default: all CPUs)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdspin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preset", help="write a preset configuration")
    p.add_argument("geometry", choices=[g.value for g in Geometry])
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("rabi", help="single-pulse amplitude scan")
    _sweep_args(p, "line plot of counts against amplitude")
    p.add_argument("--points", type=int, metavar="N", help="amplitude grid size")
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("ramsey", help="two-pulse delay scan")
    _sweep_args(p, "line plot of counts against delay")
    p.add_argument("--delay-step", type=float, metavar="PS")
    p.add_argument("--span", type=float, metavar="PS", help="delay span from zero")
    p.add_argument("--omega-p", type=float, metavar="GHZ",
                   help="fixed pulse amplitude instead of the calibrated one")
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("su2map", help="amplitude x delay control map")
    _sweep_args(p, "heatmap of counts")
    p.add_argument("--points", type=int, metavar="N", help="amplitude grid size")
    p.add_argument("--delay-min", type=float, metavar="PS")
    p.add_argument("--delay-max", type=float, metavar="PS")
    p.add_argument("--delay-step", type=float, metavar="PS")
    p.set_defaults(func=cmd_su2map)

    p = sub.add_parser("zeeman", help="four-branch transition energies against field")
    _geometry_arg(p)
    p.add_argument("--b-max", type=float, default=5.0, metavar="T")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--theta", type=float, metavar="DEG",
                   help="field angle (default: the configuration's)")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_zeeman)

    p = sub.add_parser("fit-zeeman", help="fit branch energies from a CSV file")
    p.add_argument("input", metavar="CSV", help="columns " + ",".join(
        ("B_tesla", "s_e", "s_h", "energy_ueV")))
    p.add_argument("--theta", type=float, default=60.0, metavar="DEG",
                   help="field angle of INPUT (default 60)")
    p.add_argument("--paired", metavar="CSV", help="second data set at another angle")
    p.add_argument("--paired-theta", type=float, metavar="DEG")
    p.add_argument("--out", metavar="PATH", help="also write the report here")
    p.set_defaults(func=cmd_fit_zeeman)

    p = sub.add_parser("validate", help="run the invariant and oracle checks")
    _geometry_arg(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "config"):
            args.geometry_given = args.geometry is not None
            args.geometry = args.geometry or Geometry.OBLIQUE.value
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SweepError, IntegrationError, CalibrationError, DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:  # malformed input files, invalid parameters
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_FAILURE
