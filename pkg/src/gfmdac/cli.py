"""Command line front-end: ``gfmdac run|sweep|validate|list``.

Exit codes: 0 success, 2 validation error, 3 collapse (``run`` only), 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, _jit
from .engine import compute_metrics, default_backend, parameter_sweep, run_scenario
from .scenario import BUNDLED, ScenarioValidationError, load_text, parse_and_validate, with_overrides
from .traceio import write_json, write_sweep_csv, write_trace_csv

EXIT_OK, EXIT_VALIDATION, EXIT_COLLAPSE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("gfmdac")


def parse_values(text: str) -> list[float]:
    """``"40,45,50"`` or an inclusive range ``"40:100:5"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        n = int(round((stop - start) / step))
        return [start + i * step for i in range(n + 1)]
    return [float(x) for x in text.split(",") if x.strip()]


def _param_pairs(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects <device>.<field>=<value>, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _load(args, **overrides):
    text = load_text(args.scenario)
    sc = parse_and_validate(text)
    if any(v is not None and v != {} for v in overrides.values()):
        sc = with_overrides(sc, **overrides)
    return sc


def _manifest(sc, args, backend, extra=None) -> dict:
    import numpy

    man = {
        "tool": "gfmdac",
        "version": __version__,
        "command": args.command,
        "scenario_source": str(args.scenario),
        "backend": backend,
        "numpy": numpy.__version__,
        "resolved_scenario": sc.raw,
    }
    man.update(extra or {})
    return man


def cmd_run(args) -> int:
    sc = _load(args, dac=None if args.dac is None else args.dac == "on", dt=args.dt, t_end=args.t_end,
               params=_param_pairs(args.param))
    backend = args.backend or default_backend()
    trace, metrics = run_scenario(sc, backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    summary = metrics.as_dict()
    summary["events"] = [{"t": t, "message": msg} for t, msg in trace.log]
    write_json(summary, out / "metrics.json")
    write_json(_manifest(sc, args, backend, {"outputs": ["trace.csv", "metrics.json"]}), out / "manifest.json")
    print(f"{sc.name}: violation_time={metrics.violation_time:.3f}s nadir={metrics.nadir:.4f}Hz "
          f"peak={metrics.peak:.4f}Hz occupancy={metrics.safe_band_occupancy:.4f} collapsed={metrics.collapsed}")
    return EXIT_COLLAPSE if metrics.collapsed else EXIT_OK


def cmd_sweep(args) -> int:
    values = parse_values(args.values)
    if not values:
        raise ValueError("--values is empty")
    sc = _load(args, dt=args.dt, t_end=args.t_end)
    # fail fast on a bad parameter path before spawning runs
    with_overrides(sc, params={args.param: values[0]})
    backend = args.backend or default_backend()
    rows = parameter_sweep(sc, args.param, values, jobs=args.jobs, backend=backend)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep.csv")
    write_json(_manifest(sc, args, backend, {"param": args.param, "values": values, "outputs": ["sweep.csv"]}),
               out / "manifest.json")
    print(f"{sc.name}: {len(values)} values x 2 flags -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = parse_and_validate(load_text(args.scenario))
    print(f"{sc.name}: ok ({len(sc.gfms)} gfm, {len(sc.dgs)} dg, {len(sc.grids)} grid, {len(sc.gfls)} gfl, "
          f"{len(sc.events)} events)")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in BUNDLED:
        desc = json.loads(load_text(name)).get("description", "")
        print(f"{name}: {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfmdac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gfmdac {__version__} ({_jit.backend_name()})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON path or bundled name (see `gfmdac list`)")
        sp.add_argument("--dt", type=float, help="override sim.dt (s)")
        sp.add_argument("--t-end", type=float, dest="t_end", help="override sim.t_end (s)")
        sp.add_argument("--backend", choices=["numba", "numpy"], help="kernel backend (default: numba if available)")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")

    r = sub.add_parser("run", help="simulate one scenario")
    common(r)
    r.add_argument("--dac", choices=["on", "off"], help="force the DAC on or off for every GFM")
    r.add_argument("--param", action="append", metavar="DEV.FIELD=VALUE", help="numeric device override")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one device parameter with DAC on and off")
    common(s)
    s.add_argument("--param", required=True, metavar="DEV.FIELD", help="e.g. gfm1.s_inv")
    s.add_argument("--values", required=True, help="comma list or inclusive start:stop:step")
    s.add_argument("--jobs", type=int, default=1, help="parallel runs (results keep declaration order)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="validate a scenario and report every problem")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
