"""Command-line front end.

Subcommands evaluate norms, level-set scans, the strong functional, maximal
functions, the sphere constant and A_p estimates, and run or summarize
verification experiments. Every subcommand prints a one-line summary and
writes its table to --out when given.
"""
import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numba
import numpy as np

from . import bsvy, harness, operators
from .config import Config
from .field import FunctionSpec, GridFunction, catalog_spec, make_lattice, sample
from .spaces import configure_numerics, norm, space_from_dict
from .weights import CubeFamily, WeightSpec, ap_constant, sample_weight

logger = logging.getLogger(__name__)

EXIT_USAGE = 64
EXIT_CONFIG = 65
EXIT_NO_INPUT = 66

SUBCOMMANDS = ("norm", "bsvy-scan", "bsvy-limit", "strong", "maximal", "kconst", "apconst", "verify", "report")


class UsageError(Exception):
    """Invalid command-line arguments."""


class MissingInputError(Exception):
    """A named input file does not exist."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _exponent(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--settings", help="Workbench config.json (defaults to the search path)")
    common.add_argument("--dim", "--n", dest="dim", type=int, choices=(1, 2, 3), default=1)
    common.add_argument("--points", type=_positive_int, help="Lattice nodes per axis")
    common.add_argument("--lo", type=float, default=-2.0, help="Window lower bound per axis")
    common.add_argument("--hi", type=float, default=2.0, help="Window upper bound per axis")
    common.add_argument("--function", default="smooth-bump", help="Catalog name, JSON spec or JSON file")
    common.add_argument("--space", default='{"space": "lebesgue", "p": 1}', help="JSON space spec or file")
    common.add_argument("--q", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--p", type=_exponent)
    common.add_argument("--threads", type=_positive_int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="Output file (directory for verify)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="bsvy-workbench", description="Ball Banach function space workbench")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("norm", parents=[common], help="Norm of a function in a space")
    for name in ("bsvy-scan", "bsvy-limit"):
        scan = sub.add_parser(name, parents=[common], help="Weak functional along a lambda grid")
        scan.add_argument("--lambda-min", type=float)
        scan.add_argument("--lambda-max", type=float)
        scan.add_argument("--lambda-points", type=_positive_int)
        scan.add_argument("--mode", choices=bsvy.MODES)
    sub.add_parser("strong", parents=[common], help="Strong functional (Gagliardo-type sum)")
    maximal = sub.add_parser("maximal", parents=[common], help="Discrete Hardy-Littlewood maximal function")
    maximal.add_argument("--mode", choices=("centered", "uncentered"), default="uncentered")
    sub.add_parser("kconst", parents=[common], help="Sphere constant K(q, n)")
    ap = sub.add_parser("apconst", parents=[common], help="A_p constant estimate of a weight")
    ap.add_argument("--weight", required=True, help="JSON weight spec or file")
    verify = sub.add_parser("verify", parents=[common], help="Run a verification experiment")
    verify.add_argument("--config", required=True, help="Experiment JSON file")
    report = sub.add_parser("report", parents=[common], help="Summarize a written report")
    report.add_argument("--config", required=True, help="report.json of a finished run")
    return parser


# Argument resolution

def _load_json_arg(text: str, what: str) -> Dict:
    """Inline JSON object or path to a JSON file."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as e:
            raise UsageError(f"Invalid JSON for {what}: {e}")
    path = Path(text)
    if not path.exists():
        raise MissingInputError(f"{what} file not found: {text}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise UsageError(f"Invalid JSON in {what} file {text}: {e}")


def _function(args) -> FunctionSpec:
    text = args.function.strip()
    if not text.startswith("{") and not text.endswith(".json"):
        try:
            return catalog_spec(text, args.dim)
        except ValueError as e:
            raise UsageError(str(e))
    try:
        return FunctionSpec.from_dict(_load_json_arg(text, "function"))
    except ValueError as e:
        raise UsageError(f"Invalid function spec: {e}")


def _space(args):
    try:
        return space_from_dict(_load_json_arg(args.space, "space"))
    except ValueError as e:
        raise UsageError(f"Invalid space spec: {e}")


def _field(args, config: Config) -> GridFunction:
    points = args.points or (config.ladder_1d[1] if args.dim == 1 else config.ladder_2d[0])
    if args.lo >= args.hi:
        raise UsageError(f"--lo must be below --hi, got {args.lo} >= {args.hi}")
    try:
        lattice = make_lattice(args.dim, args.lo, args.hi, points)
    except ValueError as e:
        raise UsageError(str(e))
    return sample(_function(args), lattice)


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def _apply_runtime(args) -> Config:
    if args.settings:
        if not Path(args.settings).exists():
            raise MissingInputError(f"Settings file not found: {args.settings}")
        config = Config.use_file(args.settings)
    else:
        config = Config()
    configure_numerics(config.luxemburg_rel_tol, config.luxemburg_max_iter)
    threads = args.threads or config.threads
    available = numba.config.NUMBA_NUM_THREADS
    if threads > available:
        if args.threads:
            raise UsageError(f"--threads {threads} exceeds the {available} threads numba was started with")
        threads = available
    numba.set_num_threads(threads)
    logger.debug(f"Using {threads} threads")
    return config


def _emit(rows: List[Dict], args, columns: Sequence[str]) -> None:
    """Write rows as CSV or JSON to --out (stdout when absent)."""
    if args.format == "json":
        text = json.dumps(harness.to_jsonable(rows), indent=2) + "\n"
    else:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])
        text = buffer.getvalue()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# Subcommands

def _cmd_norm(args, config: Config) -> int:
    f = _field(args, config)
    space = _space(args)
    value = norm(space, f)
    if args.out:
        _emit([{"space": space.label(), "norm": value}], args, ["space", "norm"])
    print(f"{space.label()} norm: {value!r}")
    return 0


def _scan_lambdas(args) -> Optional[np.ndarray]:
    if args.lambda_min is None and args.lambda_max is None:
        return None
    lo, hi = _require(args.lambda_min, "--lambda-min"), _require(args.lambda_max, "--lambda-max")
    if not 0 < lo < hi:
        raise UsageError(f"Lambda range needs 0 < min < max, got {lo}, {hi}")
    return np.geomspace(lo, hi, args.lambda_points or bsvy.DEFAULT_LAMBDA_POINTS)


def _profile(args, config: Config, f: GridFunction, limit: bool) -> bsvy.LevelSetProfile:
    q = args.q if args.q is not None else 1.0
    s = args.s if args.s is not None else 1.0
    try:
        return bsvy.weak_functional(
            f, _space(args), q, s, _scan_lambdas(args),
            mode=args.mode or config.scan_mode,
            self_cell_correction=config.self_cell_correction,
            points=args.lambda_points or config.lambda_points,
            min_reach_cells=config.min_reach_cells,
            max_reach_fraction=config.max_reach_fraction,
            spread_threshold=config.limit_spread_threshold,
            limit=limit,
        )
    except ValueError as e:
        raise UsageError(str(e))


def _cmd_bsvy_scan(args, config: Config) -> int:
    profile = _profile(args, config, _field(args, config), limit=False)
    rows = [{"lambda": float(lam), "value": float(v), "r_max_cells": float(r), "pair_count": int(c)}
            for lam, v, r, c in zip(profile.lambda_grid, profile.values,
                                    profile.r_max_cells, profile.pair_counts)]
    _emit(rows, args, ["lambda", "value", "r_max_cells", "pair_count"])
    print(f"sup over {len(rows)} lambdas: {profile.sup_value!r}", file=sys.stderr)
    return 0


def _cmd_bsvy_limit(args, config: Config) -> int:
    f = _field(args, config)
    profile = _profile(args, config, f, limit=True)
    q = args.q if args.q is not None else 1.0
    summary = profile.summary()
    if args.s is None or args.s == 1.0:
        summary["reference"] = bsvy.limit_reference(f, _space(args), q)
    if args.out:
        _emit([summary], args, list(summary))
    print(f"limit: {summary['limit']!r} (spread {summary['diagnostic']:.3g}, "
          f"reliable={summary['reliable']}), reference: {summary.get('reference')!r}")
    return 0 if profile.reliable else 2


def _cmd_strong(args, config: Config) -> int:
    f = _field(args, config)
    q = args.q if args.q is not None else 1.0
    s = args.s if args.s is not None else 0.5
    try:
        value = bsvy.strong_functional(f, _space(args), q, s)
    except ValueError as e:
        raise UsageError(str(e))
    if args.out:
        _emit([{"q": q, "s": s, "value": value}], args, ["q", "s", "value"])
    print(f"strong functional (q={q}, s={s}): {value!r}")
    return 0


def _cmd_maximal(args, config: Config) -> int:
    f = _field(args, config)
    stride = config.center_stride_1d if args.dim == 1 else config.center_stride_nd
    cfg = operators.MaximalConfig.default(f.lattice, args.mode, config.radius_steps_per_octave, stride)
    mf = operators.maximal(f, cfg)
    coords = f.lattice.coordinates().reshape(-1, args.dim)
    names = ["x", "y", "z"][: args.dim]
    rows = [dict(zip(names + ["f", "Mf"], [float(c) for c in point] + [float(a), float(b)]))
            for point, a, b in zip(coords, f.values.ravel(), mf.values.ravel())]
    if args.out:
        _emit(rows, args, names + ["f", "Mf"])
    print(f"{args.mode} maximal function: max {mf.max_abs()!r} over {len(cfg.radii)} radii")
    return 0


def _cmd_kconst(args, config: Config) -> int:
    q = _require(args.q, "--q")
    try:
        k = bsvy.sphere_constant(float(q), args.dim)
    except ValueError as e:
        raise UsageError(str(e))
    if args.out:
        _emit([{"q": q, "n": args.dim, "closed_form": k.closed_form, "quadrature": k.quadrature,
                "trapezoid": "" if k.trapezoid is None else k.trapezoid}],
              args, ["q", "n", "closed_form", "quadrature", "trapezoid"])
    print(f"K({q:g},{args.dim}) closed form: {k.closed_form!r}, quadrature: {k.quadrature!r}")
    return 0


def _cmd_apconst(args, config: Config) -> int:
    p = args.p if args.p is not None else 1.0
    points = args.points or (config.ladder_1d[1] if args.dim == 1 else config.ladder_2d[0])
    try:
        lattice = make_lattice(args.dim, args.lo, args.hi, points)
        w = sample_weight(WeightSpec.from_dict(_load_json_arg(args.weight, "weight")), lattice)
        estimate = ap_constant(w, p, CubeFamily(config.corner_stride, config.min_side_cells))
    except ValueError as e:
        raise UsageError(str(e))
    if args.out:
        _emit([{"p": p, "value": estimate.value, "cubes": estimate.cube_family_size}],
              args, ["p", "value", "cubes"])
    print(f"[w]_A{p:g} >= {estimate.value!r} on cube {estimate.attaining_cube} "
          f"({estimate.cube_family_size} cubes)")
    return 0


def _cmd_verify(args, config: Config) -> int:
    path = Path(args.config)
    if not path.exists():
        raise MissingInputError(f"Experiment config not found: {args.config}")
    experiment = harness.load_experiment(path)
    if args.seed is not None:
        experiment.seed = args.seed
    settings = harness.HarnessSettings.from_config(config)
    report = harness.run_experiment(experiment, settings)
    out = args.out or experiment.output or str(Path(config.output_dir) / experiment.kind)
    report.write(out)
    failed = [a.name for a in report.assertions if a.verdict != harness.PASS]
    print(f"{experiment.kind}: {report.status} ({len(report.assertions)} assertions"
          + (f", not passing: {', '.join(failed)}" if failed else "") + f") -> {out}")
    return report.exit_code


def _cmd_report(args, config: Config) -> int:
    path = Path(args.config)
    if not path.exists():
        raise MissingInputError(f"Report not found: {args.config}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"Invalid JSON in report {args.config}: {e}")
    assertions = data.get("assertions", [])
    rows = [{k: a.get(k) for k in ("name", "verdict", "measured", "threshold")} for a in assertions]
    if args.out:
        _emit(rows, args, ["name", "verdict", "measured", "threshold"])
    status = data.get("status", harness.PASS)
    kind = data.get("config", {}).get("kind")
    print(f"{kind}: {status} ({len(assertions)} assertions)")
    return {harness.PASS: 0, harness.FAIL: 1, harness.UNRELIABLE: 2}.get(status, 1)


_COMMANDS = {
    "norm": _cmd_norm,
    "bsvy-scan": _cmd_bsvy_scan,
    "bsvy-limit": _cmd_bsvy_limit,
    "strong": _cmd_strong,
    "maximal": _cmd_maximal,
    "kconst": _cmd_kconst,
    "apconst": _cmd_apconst,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit status."""
    try:
        args = build_parser().parse_args(argv)
        config = _apply_runtime(args)
        return _COMMANDS[args.command](args, config)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except harness.HypothesisError as e:
        print(f"hypothesis violated: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_INPUT
    except ValueError as e:
        # Malformed experiment or settings values
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as e:
        logger.error(f"{e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
