"""``bench`` command line: run figure reproductions, fit data files, sweep, serve."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    extract_vpi_from_ramp,
    fit_envelope_sinusoid_spectrum,
    fit_gaussian_peak,
    fit_lorentzian_resonance,
    fit_sinusoid,
)
from .electrooptic import DriveWaveform
from .errors import ConfigError, FitError
from .harness import FIGURES, ReproductionSpec, emit_reports, load_defaults, run_reproduction
from .photon_mc import load_scenario, run_scenario, sweep_values
from .timetag import Histogram

FIT_MODELS = ("lorentzian", "gaussian", "sinusoid", "vpi-ramp", "envelope")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_sets(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(item, "expected key=value")
        out[key.strip()] = _parse_value(value.strip())
    return out


def _read_columns(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header row and data rows")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    return {h: data[:, i] for i, h in enumerate(header)}


def _histogram(path: str, period_ps: int | None) -> Histogram:
    return Histogram.from_csv(Path(path).read_text(), fold_period_ps=period_ps)


def cmd_run(args) -> int:
    spec = ReproductionSpec(args.figure, args.seed, _parse_sets(args.set), args.out)
    report = run_reproduction(spec)
    target = emit_reports(report, args.out)
    for c in report.checks:
        status = "PASS" if c["pass"] else "FAIL"
        extra = f" ({c['note']})" if "note" in c else ""
        print(f"{status} {report.figure} {c['metric']} = {c['measured']}{extra}")
    print(f"reports written to {target}")
    return 0 if report.passed else 1


def cmd_fit(args) -> int:
    if args.model == "lorentzian":
        cols = _read_columns(args.data)
        names = list(cols)
        fit = fit_lorentzian_resonance(cols[names[0]], cols[names[1]])
    elif args.model == "envelope":
        cols = _read_columns(args.data)
        names = list(cols)
        if len(names) < 3:
            raise ValueError("envelope fit needs three columns (wavelength first, then reference and device power)")
        lam = cols[names[0]]
        fit = fit_envelope_sinusoid_spectrum(lam, cols[names[1]], lam, cols[names[2]])
    elif args.model == "gaussian":
        fit = fit_gaussian_peak(_histogram(args.data, None))
    elif args.model == "sinusoid":
        fit = fit_sinusoid(_histogram(args.data, args.period_ps))
    else:
        if args.vpp is None or args.frequency is None:
            raise ValueError("vpi-ramp needs --vpp and --frequency")
        ramp = DriveWaveform("ramp", args.vpp, args.frequency, args.offset)
        fit = extract_vpi_from_ramp(_histogram(args.data, ramp.period_ps), ramp)
    print(fit.to_json())
    return 0 if fit.converged else 1


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    values = np.linspace(args.start, args.stop, args.steps)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow([args.param, "counts_det1", "counts_det2", "rate_det1_cps", "rate_det2_cps", "out1_w", "out2_w"])
        for v, s in zip(values, sweep_values(base, args.param, [float(x) for x in values])):
            r = run_scenario(s)
            n1, n2 = r.tags[1].size, r.tags[2].size
            w.writerow([repr(float(v)), n1, n2, repr(n1 / s.duration_s), repr(n2 / s.duration_s),
                        repr(r.monitor_power_w["out1"]), repr(r.monitor_power_w["out2"])])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_serve(args) -> int:
    import logging

    from .server import run_server

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    run_server(args.port, host=args.host, realtime=args.realtime)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="reproduce one figure and check it")
    r.add_argument("figure", choices=FIGURES)
    r.add_argument("--seed", type=int, default=load_defaults()["default_seed"])
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a parameter (dotted path; repeatable)")
    r.add_argument("--out", default="reports")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fit", help="fit a model to a CSV data file")
    f.add_argument("model", choices=FIT_MODELS)
    f.add_argument("data")
    f.add_argument("--period-ps", type=int, default=None, help="fold period for sinusoid fits")
    f.add_argument("--vpp", type=float, default=None)
    f.add_argument("--frequency", type=float, default=None, help="ramp frequency in Hz")
    f.add_argument("--offset", type=float, default=0.0, help="ramp offset voltage")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", help="run a scenario over a range of one parameter")
    s.add_argument("scenario")
    s.add_argument("--param", required=True)
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--out", default=None, help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("serve", help="start the virtual instrument server")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8471)
    v.add_argument("--realtime", action="store_true", help="pace tag emission to wall-clock time")
    v.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid parameter {exc}", file=sys.stderr)
    except (FitError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
