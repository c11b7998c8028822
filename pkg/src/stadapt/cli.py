"""Command-line interface: ``stadapt <command> [options]``.

Every command accepts ``--config FILE``: a JSON object whose keys are the
command's option names (dashes or underscores).  Explicit flags override
config values.  Errors are written to stderr as one JSON object and the
process exits non-zero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import io
from .adaptive import build_partition, estimate_adaptive_direct, estimate_adaptive_partition
from .bandwidths import abramson_bandwidths, oversmooth_bandwidth, pilot_intensities, temporal_plugin_bandwidth
from .evaluate import ise_density_scale, median_ise, run_bins_experiment, write_records
from .fixed import estimate_fixed_fft
from .geom import SpatialWindow, TimeInterval, make_grid
from .kernels import KernelSpec
from .projection import EARTH_RADIUS_KM, project_albers
from .simulate import PARAMETER_SETS, TEST_POLYGON, GneitingParams, SimConfig, simulate_lgcp

log = logging.getLogger("stadapt")


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _add_pattern_args(p):
    p.add_argument("--points", help="CSV with header x,y,t")
    p.add_argument("--polygon", help="CSV of window vertices x,y")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--strict", action="store_true", help="fail on events outside the window")
    p.add_argument("--grid", type=int, nargs=3, default=[64, 64, 32], metavar=("M1", "M2", "M3"))
    p.add_argument("--eps-star", type=float)
    p.add_argument("--delta-star", type=float)


def _add_sim_args(p):
    p.add_argument("--set", type=int, choices=sorted(PARAMETER_SETS), default=2)
    for name in ("sigma2", "c", "a", "alpha", "beta"):
        p.add_argument(f"--{name}", type=float, help=f"override {name} of the parameter set")
    p.add_argument("--mu", type=float, default=1000.0, help="expected number of events")
    p.add_argument("--sim-grid", type=int, nargs=3, default=[16, 16, 16], metavar=("M1", "M2", "M3"))
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="stadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate an LGCP pattern")
    _add_sim_args(p)
    p.add_argument("--polygon", help="window CSV (default: built-in test polygon)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--out", required=True, help="points CSV")
    p.add_argument("--polygon-out", help="write the window CSV here")
    p.add_argument("--truth", help="write the realised intensity grid here")

    p = sub.add_parser("bandwidths", help="global and adaptive bandwidths")
    _add_pattern_args(p)
    p.add_argument("--out", help="per-event CSV x,y,t,eps,delta")

    p = sub.add_parser("estimate", help="estimate the intensity on a grid")
    _add_pattern_args(p)
    p.add_argument("--method", choices=["fixed", "adaptive-direct", "adaptive-partition"], default="adaptive-partition")
    p.add_argument("--xi1", type=float)
    p.add_argument("--xi2", type=float)
    p.add_argument("--bins", type=int, nargs=2, metavar=("C1", "C2"), help="override the number of bins")
    p.add_argument("--smoothing", choices=["auto", "fft", "matmul"], default="auto",
                   help="convolution route of the partition estimator")
    p.add_argument("--out", required=True, help="output grid file")
    p.add_argument("--csv-slices", help="directory for per-time-slice CSVs")

    p = sub.add_parser("bench-bins", help="partition vs direct ISE/timing experiment")
    _add_sim_args(p)
    p.add_argument("--n-patterns", type=int, default=20)
    p.add_argument("--xi", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.01])
    p.add_argument("--all-pairs", action="store_true", help="all (xi1, xi2) combinations, not only xi1 == xi2")
    p.add_argument("--grid", type=int, nargs=3, default=[64, 64, 32], metavar=("M1", "M2", "M3"))
    p.add_argument("--out", required=True, help="records CSV")

    p = sub.add_parser("project", help="Albers equal-area projection of lon/lat CSV")
    p.add_argument("--in", dest="input", required=True, help="CSV with header lon,lat[,t]")
    p.add_argument("--parallels", type=float, nargs=2, required=True, metavar=("PHI1", "PHI2"))
    p.add_argument("--origin", type=float, nargs=2, required=True, metavar=("PHI0", "LAMBDA0"))
    p.add_argument("--radius", type=float, default=EARTH_RADIUS_KM)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ise", help="density-scale ISE between two grid files")
    p.add_argument("--estimate", required=True)
    p.add_argument("--reference", required=True)

    for action in sub.choices.values():
        action.add_argument("--config", help="JSON file of option values")
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise CLIError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions if a.dest not in ("help", "config")}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise CLIError(f"unknown config keys for '{args.command}': {unknown}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def _load_pattern(args):
    if not args.points or not args.polygon:
        raise CLIError("--points and --polygon are required")
    window = io.read_polygon(args.polygon)
    if args.t0 is not None and args.t1 is not None:
        interval = TimeInterval(args.t0, args.t1)
    elif args.t0 is None and args.t1 is None:
        interval = None
    else:
        raise CLIError("give both --t0 and --t1, or neither (JSON sidecar)")
    pattern, dropped = io.read_pattern(args.points, window, interval, strict=args.strict)
    if dropped:
        print(json.dumps({"warning": "points dropped outside window", "count": dropped}), file=sys.stderr)
    return pattern


def _sim_params(args):
    base = PARAMETER_SETS[args.set]
    kw = {k: getattr(args, k) if getattr(args, k) is not None else getattr(base, k)
          for k in ("sigma2", "c", "a", "alpha", "beta")}
    return GneitingParams(mu=args.mu, **kw)


def _adaptive_setup(args, pattern, grid):
    eps_star = args.eps_star if args.eps_star is not None else oversmooth_bandwidth(pattern)
    delta_star = args.delta_star if args.delta_star is not None else temporal_plugin_bandwidth(pattern.t)
    pilots = pilot_intensities(pattern, eps_star, delta_star, grid)
    return eps_star, delta_star, pilots, abramson_bandwidths(pattern, eps_star, delta_star, pilots)


def cmd_simulate(args):
    window = io.read_polygon(args.polygon) if args.polygon else SpatialWindow(TEST_POLYGON)
    cfg = SimConfig(_sim_params(args), window, TimeInterval(args.t0, args.t1), tuple(args.sim_grid), args.seed)
    pattern, truth = simulate_lgcp(cfg)
    io.write_pattern(pattern, args.out)
    if args.polygon_out:
        io.write_polygon(window, args.polygon_out)
    if args.truth:
        io.write_grid(truth, args.truth)
    return {"n": pattern.n, "seed": args.seed}


def cmd_bandwidths(args):
    pattern = _load_pattern(args)
    grid = make_grid(pattern.window, pattern.interval, *args.grid)
    eps_star, delta_star, pilots, bw = _adaptive_setup(args, pattern, grid)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("x,y,t,eps,delta\n")
            for (x, y, t), e, d in zip(pattern.xyt, bw.eps, bw.delta):
                fh.write(f"{x!r},{y!r},{t!r},{e!r},{d!r}\n")
    return {"n": pattern.n, "eps_star": eps_star, "delta_star": delta_star,
            "gamma_s": bw.gamma_s, "gamma_t": bw.gamma_t,
            "eps_range": [float(bw.eps.min()), float(bw.eps.max())],
            "delta_range": [float(bw.delta.min()), float(bw.delta.max())]}


def cmd_estimate(args):
    pattern = _load_pattern(args)
    grid = make_grid(pattern.window, pattern.interval, *args.grid)
    if args.method == "fixed":
        eps_star = args.eps_star if args.eps_star is not None else oversmooth_bandwidth(pattern)
        delta_star = args.delta_star if args.delta_star is not None else temporal_plugin_bandwidth(pattern.t)
        est = estimate_fixed_fft(pattern, KernelSpec(eps_star, delta_star), grid)
    else:
        _, _, pilots, bw = _adaptive_setup(args, pattern, grid)
        if args.method == "adaptive-direct":
            est = estimate_adaptive_direct(pattern, bw, pilots, grid)
        else:
            if args.bins:
                c1, c2 = args.bins
            else:
                c1, c2 = io.default_bin_counts(pattern.n)
            xi1 = args.xi1 if args.xi1 is not None else 1.0 / c1
            xi2 = args.xi2 if args.xi2 is not None else 1.0 / c2
            est = estimate_adaptive_partition(pattern, bw, build_partition(bw, xi1, xi2), grid,
                                              smoothing=args.smoothing)
    io.write_grid(est, args.out)
    if args.csv_slices:
        io.write_csv_slices(est, args.csv_slices)
    return {"n": pattern.n, "method": args.method, "out": args.out, "integral": est.integral()}


def cmd_bench_bins(args):
    xs = args.xi
    pairs = [(a, b) for a in xs for b in xs] if args.all_pairs else [(a, a) for a in xs]
    recs = run_bins_experiment(args.n_patterns, _sim_params(args), pairs, tuple(args.grid), args.seed,
                               sim_shape=tuple(args.sim_grid),
                               progress=lambda pid: log.info("pattern %d done", pid))
    write_records(recs, args.out)
    return {"records": len(recs), "median_ise": {f"{k[0]},{k[1]}": v for k, v in median_ise(recs).items()}}


def cmd_project(args):
    import csv

    with open(args.input, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header[:2] != ["lon", "lat"]:
            raise CLIError(f"{args.input}: header must start with lon,lat")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CLIError(f"{args.input}: row {lineno}: non-numeric value") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    x, y = project_albers(data[:, 0], data[:, 1], tuple(args.parallels), tuple(args.origin), args.radius)
    with open(args.out, "w") as fh:
        extra = header[2:]
        fh.write(",".join(["x", "y"] + extra) + "\n")
        for i in range(len(x)):
            fh.write(",".join(repr(float(v)) for v in [x[i], y[i], *data[i, 2:]]) + "\n")
    return {"n": len(x), "out": args.out}


def cmd_ise(args):
    return {"ise": ise_density_scale(io.read_grid(args.estimate), io.read_grid(args.reference))}


COMMANDS = {
    "simulate": cmd_simulate,
    "bandwidths": cmd_bandwidths,
    "estimate": cmd_estimate,
    "bench-bins": cmd_bench_bins,
    "project": cmd_project,
    "ise": cmd_ise,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        result = COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except CLIError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
