"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import exceptions
from .config import CONFIG_ENV, load_config
from .exceptions import ConfigError, NumericalError, VocalFoldError
from .glottal import flow_from_displacement
from .model import ModelParams, simulate, write_trajectory_csv
from .phase import bifurcation_sweep
from .pipeline import INPUT_KINDS, analyze_file, characterise, collect_inputs, fit_flow, load_measured, run_batch

log = logging.getLogger("vocalfold")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help=f"TOML run configuration (default: ${CONFIG_ENV})")
    p.add_argument("--dump-config", metavar="PATH", help="write the effective configuration and continue")
    p.add_argument("-v", "--verbose", action="store_true")


def _param_flags(p, required):
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--beta", type=float, help="default 0.32")
    p.add_argument("--delta", type=float, required=required)
    p.add_argument("--c-r", type=float)
    p.add_argument("--c-l", type=float)


def build_parser():
    parser = _Parser(prog="vocalfold", description="Asymmetric vocal-fold model: simulate, analyse, fit, classify.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate the model and write trajectory and flow CSVs")
    _common(p)
    _param_flags(p, required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float, help="horizon (default: simulation.horizon)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bifurcate", help="attractor sweep over (alpha, delta)")
    _common(p)
    p.add_argument("--alpha-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--delta-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--beta", type=float)
    p.add_argument("--grid", type=int, nargs=2, metavar=("NA", "ND"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoint", help="resumable progress file (default: OUT.partial)")
    p.add_argument("--out", required=True, help="grid CSV; a JSON sidecar is written next to it")

    p = sub.add_parser("estimate", help="fit (alpha, beta, delta) to a recording or flow")
    _common(p)
    p.add_argument("input")
    p.add_argument("--input-kind", choices=INPUT_KINDS, default="auto")
    p.add_argument("--method", choices=("gd", "bfgs"))
    p.add_argument("--max-iter", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--delta0", type=float)
    p.add_argument("--trace", help="per-iteration CSV")
    p.add_argument("--out", help="FitResult JSON (default: stdout)")

    p = sub.add_parser("classify", help="pathology label of parameters or of a recording")
    _common(p)
    p.add_argument("input", nargs="?", help="WAV/CSV recording or FitResult JSON")
    p.add_argument("--input-kind", choices=INPUT_KINDS, default="auto")
    _param_flags(p, required=False)
    p.add_argument("--out", help="JSON output (default: stdout)")

    p = sub.add_parser("batch", help="run the full pipeline on every file of a directory")
    _common(p)
    p.add_argument("directory")
    p.add_argument("--pattern", help="glob for input files (default: batch.pattern)")
    p.add_argument("--input-kind", choices=INPUT_KINDS, default="auto")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="report JSON; a CSV with the same stem is written as well")
    return parser


def _emit(text, out):
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _params(args, cfg):
    sim = cfg.simulation
    beta = 0.32 if args.beta is None else args.beta
    return ModelParams(args.alpha, beta, args.delta,
                       sim.c_r if args.c_r is None else args.c_r, sim.c_l if args.c_l is None else args.c_l)


def cmd_simulate(args, cfg):
    params = _params(args, cfg)
    dt = cfg.simulation.dt if args.dt is None else args.dt
    t_end = cfg.simulation.horizon if args.t_end is None else args.t_end
    traj = simulate(params, dt, t_end)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / "trajectory.csv")
    flow_from_displacement(traj, cfg.physical).to_csv(out / "flow.csv")
    log.info("wrote %s and %s", out / "trajectory.csv", out / "flow.csv")
    return EXIT_OK


def cmd_bifurcate(args, cfg):
    sw = cfg.sweep
    a_range = tuple(args.alpha_range) if args.alpha_range else (sw.alpha_min, sw.alpha_max)
    d_range = tuple(args.delta_range) if args.delta_range else (sw.delta_min, sw.delta_max)
    shape = tuple(args.grid) if args.grid else (sw.n_alpha, sw.n_delta)
    beta = sw.beta if args.beta is None else args.beta
    out = Path(args.out)
    checkpoint = Path(args.checkpoint) if args.checkpoint else out.with_name(out.name + ".partial")
    grid = bifurcation_sweep(a_range, d_range, beta, shape, cfg.simulation, args.workers, checkpoint)
    grid.write(out)
    checkpoint.unlink(missing_ok=True)
    return EXIT_OK


def cmd_estimate(args, cfg):
    cfg = cfg.override("optimizer", method=args.method, max_iter=args.max_iter, restarts=args.restarts)
    cfg = cfg.override("init", alpha=args.alpha0, beta=args.beta0, delta=args.delta0)
    flow, _ = load_measured(args.input, args.input_kind, cfg)
    result = fit_flow(flow, cfg)
    if args.trace:
        result.write_trace(args.trace)
    _emit(result.to_json(), args.out)
    return EXIT_OK


def cmd_classify(args, cfg):
    if args.input is None:
        if args.alpha is None or args.delta is None:
            raise _UsageError("classify needs an input file or --alpha and --delta")
        return _classify_params(_params(args, cfg), cfg, args.out)
    path = Path(args.input)
    if path.suffix.lower() == ".json":
        d = json.loads(path.read_text())
        try:
            params = ModelParams(d["alpha"], d["beta"], d["delta"], cfg.simulation.c_r, cfg.simulation.c_l)
        except KeyError as exc:
            raise ConfigError(f"{path}: missing key {exc}") from exc
        return _classify_params(params, cfg, args.out)
    analysis = analyze_file(path, cfg, args.input_kind)
    _emit(json.dumps(analysis.to_dict(), indent=2), args.out)
    if not analysis.ok:
        return EXIT_NUMERICAL if _numerical(analysis.error_type) else EXIT_DATA
    return EXIT_OK


def _classify_params(params, cfg, out):
    report, label = characterise(params, cfg)
    doc = {"params": _param_dict(params), "attractor": report.to_dict(), "classification": label.to_dict()}
    _emit(json.dumps(doc, indent=2), out)
    return EXIT_OK


def _numerical(name):
    kind = getattr(exceptions, name or "", None)
    return isinstance(kind, type) and issubclass(kind, NumericalError)


def _param_dict(p):
    return {"alpha": p.alpha, "beta": p.beta, "delta": p.delta, "c_r": p.c_r, "c_l": p.c_l}


def cmd_batch(args, cfg):
    if args.workers is not None:
        cfg = replace(cfg, batch=replace(cfg.batch, workers=args.workers))
    paths = collect_inputs(args.directory, args.pattern, cfg)
    if not paths:
        log.warning("no input files in %s", args.directory)
    report = run_batch(paths, cfg, args.input_kind)
    out = Path(args.out)
    report.write_json(out)
    report.write_csv(out.with_suffix(".csv"))
    for label, count in report.summary.items():
        log.info("%s: %d", label, count)
    return EXIT_OK


class _UsageError(Exception):
    pass


COMMANDS = {
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "estimate": cmd_estimate,
    "classify": cmd_classify,
    "batch": cmd_batch,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.dump_config:
            cfg.dump(args.dump_config)
        return COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"vocalfold: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VocalFoldError as exc:
        print(f"vocalfold: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"vocalfold: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
