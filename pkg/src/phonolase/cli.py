"""Command-line interface: ``phonolase run|sweep|spectrum|wigner|reproduce``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, engine, io, observables as obs, sweep
from .config import ConfigError, RunSpec, SweepSpec, parse_config

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _overrides(spec, args):
    tmpl = spec.template if isinstance(spec, SweepSpec) else spec
    if getattr(args, "cutoff", None) is not None:
        tmpl = replace(tmpl, cutoff=args.cutoff)
    if getattr(args, "tail", None) is not None:
        tmpl = replace(tmpl, target_tail=args.tail)
    if isinstance(spec, SweepSpec):
        jobs = args.jobs if getattr(args, "jobs", None) is not None else spec.jobs
        return SweepSpec(tmpl, spec.axes, jobs)
    return tmpl


def _load(args, want_sweep: bool | None = None):
    spec = _overrides(parse_config(args.config), args)
    if want_sweep is True and not isinstance(spec, SweepSpec):
        raise ConfigError("this command needs a [sweep] table", "sweep")
    if want_sweep is False and isinstance(spec, SweepSpec):
        raise ConfigError("use the 'sweep' command for configurations with a [sweep] table", "sweep")
    return spec


def _emit(text: str, out: Path | None, name: str):
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _csv_text(columns, rows, params, assumptions, extra=None) -> str:
    lines = io.header_lines(params, assumptions, extra)
    lines.append(",".join(columns))
    lines += [",".join(io._fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_run(args):
    spec: RunSpec = _load(args, want_sweep=False)
    rec = sweep.run_single(spec)
    if not rec.ok:
        raise engine.EngineError(rec.error)
    cols, rows = sweep.record_rows([rec], [])
    out = Path(args.out) if args.out else None
    summary = {"version": __version__, "params": spec.echo(), "assumptions": list(spec.assumptions),
               "record": rec.as_dict()}
    if args.format == "json":
        _emit(io.to_json(summary) + "\n", out, "run.json")
    else:
        _emit(_csv_text(cols, rows, spec.echo(), spec.assumptions), out, "run.csv")
        if out is not None:
            io.write_json(out / "run.json", summary)
    return 0


def cmd_sweep(args):
    spec: SweepSpec = _load(args, want_sweep=True)
    records = sweep.run_sweep(spec)
    names = [ax.parameter for ax in spec.axes]
    cols, rows = sweep.record_rows(records, names)
    echo = spec.template.echo()
    for ax in spec.axes:
        echo[f"sweep.{ax.parameter}"] = " ".join(io._fmt(v) for v in ax.values)
    out = Path(args.out) if args.out else None
    failed = [r.index for r in records if not r.ok]
    if args.format == "json":
        _emit(io.to_json({"params": echo, "records": [r.as_dict() for r in records]}) + "\n", out, "sweep.json")
    else:
        _emit(_csv_text(cols, rows, echo, spec.template.assumptions, {"failed_points": len(failed)}), out, "sweep.csv")
        if out is not None:
            timing = {"wall_time": {r.index: r.wall_time for r in records}, "failed": failed}
            io.write_json(out / "sweep_diagnostics.json", timing)
    return 0


def cmd_spectrum(args):
    spec: RunSpec = _load(args, want_sweep=False)
    model = spec.model()
    ss, tail = sweep.solve_spec(spec)
    G, K = obs.gain_loss_expect(ss.rho, ss.space, model.params, model.decay)
    L = model.liouvillian(ss.space)
    tau_max = args.tau_max if args.tau_max else min(max(30.0 / max(K - G, 2e-4), 50.0), 40000.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", obs.SpectrumWarning)
        s = obs.spectrum_numeric(ss.rho, L, tau_max, args.points)
    extra = {"n_ss": s.n_ss, "gamma_fit": s.gamma, "gamma_formula": K - G, "tau_max": tau_max,
             "n_max": ss.space.n_max, "convention": "int S dw/2pi = n_ss"}
    for w in caught:
        extra.setdefault("warning", str(w.message))
    rows = np.column_stack([s.omega, s.S])
    out = Path(args.out) if args.out else None
    if args.format == "json":
        _emit(io.to_json({"params": spec.echo(), **extra, "omega": s.omega, "S": s.S}) + "\n", out, "spectrum.json")
    else:
        _emit(_csv_text(["omega", "S"], rows, spec.echo(), spec.assumptions, extra), out, "spectrum.csv")
    return 0


def cmd_wigner(args):
    spec: RunSpec = _load(args, want_sweep=False)
    ss, tail = sweep.solve_spec(spec)
    extent = args.extent or max(4.0, 3 * np.sqrt(obs.mean_phonon(ss.rho, ss.space) + 1))
    x = np.linspace(-extent, extent, args.points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", obs.TruncationWarning)
        grid = obs.wigner(ss.rho, ss.space, x, x)
    extra = {"normalization": grid.normalization(), "n_max": ss.space.n_max}
    out = Path(args.out) if args.out else Path(".")
    files = io.write_matrix(out / "wigner.csv", grid.W, grid.x, grid.p, spec.echo(), spec.assumptions, extra)
    if args.format == "json":
        sys.stdout.write(io.to_json({"files": files, **extra}) + "\n")
    else:
        sys.stdout.write("\n".join(str(f) for f in files) + "\n")
    return 0


def cmd_reproduce(args):
    from .reproduce import reproduce

    opts = {}
    if args.quick:
        opts = {
            "fig2": {"points": 41},
            "fig3": {"g1_values": [0.02, 0.08, 0.2], "spectra_g1": (0.08, 0.2)},
            "fig4": {"r_values": [0.0, 0.6, 1.2]},
            "fig5": {"n_phi": 4, "points": 41},
        }[args.figure]
    entry = reproduce(args.figure, args.out, jobs=args.jobs or 1, plot=not args.no_plot, **opts)
    sys.stdout.write(io.to_json(entry) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phonolase", description=__doc__)
    p.add_argument("--version", action="version", version=f"phonolase {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=False):
        sp.add_argument("config", help="TOML configuration file")
        sp.add_argument("--cutoff", type=int, help="fixed Fock cutoff n_max (default: adaptive)")
        sp.add_argument("--tail", type=float, help="adaptive-cutoff tail bound (default 1e-6)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", help="output directory (default: stdout)")
        if jobs:
            sp.add_argument("--jobs", type=int, help="worker processes")

    common(sub.add_parser("run", help="single steady-state run"))
    common(sub.add_parser("sweep", help="parameter sweep"), jobs=True)
    sp = sub.add_parser("spectrum", help="QRT emission spectrum")
    common(sp)
    sp.add_argument("--tau-max", type=float, help="correlation window (default from the linewidth)")
    sp.add_argument("--points", type=int, default=8001)
    sp = sub.add_parser("wigner", help="Wigner function of the phonon mode")
    common(sp)
    sp.add_argument("--extent", type=float, help="half-width of the square grid")
    sp.add_argument("--points", type=int, default=121)
    sp = sub.add_parser("reproduce", help="figure data sets, plots and manifest")
    sp.add_argument("figure", choices=("fig2", "fig3", "fig4", "fig5"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--no-plot", action="store_true", help="skip the PNG rendering")
    sp.add_argument("--quick", action="store_true", help="coarse grids for smoke tests")
    return p


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "spectrum": cmd_spectrum, "wigner": cmd_wigner,
            "reproduce": cmd_reproduce}


def _fail(kind: str, exc: Exception, code: int) -> int:
    err = {"error": kind, "type": type(exc).__name__, "message": str(exc).strip()}
    if getattr(exc, "field", None):
        err["field"] = exc.field
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (engine.EngineError, sweep.SweepFailed, RuntimeError, ValueError, OSError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
