"""Declarative verification experiments.

An ExperimentConfig names an experiment kind and its parameters; run_experiment
runs the refinement ladder, evaluates named assertions and returns an
ExperimentReport that can be written as JSON plus a CSV convergence table.
"""
import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numba
import numpy as np
import psutil
from scipy.integrate import cumulative_trapezoid

from . import bsvy, dyadic, operators
from .field import (FunctionSpec, GridFunction, Lattice, catalog_spec, integrate, make_lattice, mollify,
                    sample, sample_gradient, smooth_catalog)
from .spaces import (ExponentSpec, Lebesgue, MixedNorm, Morrey, Orlicz, OrliczSlice, OrliczSpec,
                     SpaceSpec, VariableLebesgue, WeightedLebesgue, ball_indicator, convexify,
                     indicator_duality, norm, space_exponent, space_from_dict, weighted_lp_norm)
from .weights import CubeFamily, WeightSpec, a1_constant, sample_weight

logger = logging.getLogger(__name__)

KINDS = (
    "limit-identity",
    "sandwich",
    "s1-divergence",
    "poincare",
    "ap-necessity",
    "sobolev-interp",
    "gn-interp",
    "rubio",
    "dyadic-cover",
    "space-identities",
    "duality",
    "riesz-bound",
    "br-uniform",
    "lusin-lipschitz",
)

PASS, FAIL, UNRELIABLE = "pass", "fail", "unreliable"

RELATION_TOLERANCE = 1e-12
AP_WINDOW = (-8.0, 8.0)
AP_MOLLIFIER = 16


class HypothesisError(ValueError):
    """Experiment parameters violate a hypothesis of the checked statement."""


@dataclass
class HarnessSettings:
    """Workbench defaults the harness passes down to the library."""

    lambda_points: int = bsvy.DEFAULT_LAMBDA_POINTS
    min_reach_cells: float = bsvy.DEFAULT_MIN_REACH_CELLS
    max_reach_fraction: float = bsvy.DEFAULT_MAX_REACH_FRACTION
    spread_threshold: float = bsvy.DEFAULT_SPREAD_THRESHOLD
    self_cell_correction: bool = True
    mode: str = "accelerated"
    steps_per_octave: int = operators.DEFAULT_STEPS_PER_OCTAVE
    center_stride_1d: int = operators.DEFAULT_STRIDE_1D
    center_stride_nd: int = operators.DEFAULT_STRIDE_ND
    rdf_k_max: int = operators.DEFAULT_K_MAX
    rdf_headroom: float = operators.DEFAULT_HEADROOM
    corner_stride: int = 4
    min_side_cells: int = 4
    ladder_1d: List[int] = dc_field(default_factory=lambda: [513, 1025, 2049, 4097])
    ladder_2d: List[int] = dc_field(default_factory=lambda: [64, 128])
    tolerances: Dict[str, float] = dc_field(default_factory=dict)

    @classmethod
    def from_config(cls, config) -> "HarnessSettings":
        return cls(
            lambda_points=config.lambda_points,
            min_reach_cells=config.min_reach_cells,
            max_reach_fraction=config.max_reach_fraction,
            spread_threshold=config.limit_spread_threshold,
            self_cell_correction=config.self_cell_correction,
            mode=config.scan_mode,
            steps_per_octave=config.radius_steps_per_octave,
            center_stride_1d=config.center_stride_1d,
            center_stride_nd=config.center_stride_nd,
            rdf_k_max=config.rdf_k_max,
            rdf_headroom=config.rdf_headroom,
            corner_stride=config.corner_stride,
            min_side_cells=config.min_side_cells,
            ladder_1d=list(config.ladder_1d),
            ladder_2d=list(config.ladder_2d),
            tolerances=dict(config.tolerances),
        )

    def ladder(self, dim: int) -> List[int]:
        return list(self.ladder_1d if dim == 1 else self.ladder_2d)

    def maximal_config(self, lattice: Lattice) -> operators.MaximalConfig:
        stride = self.center_stride_1d if lattice.dim == 1 else self.center_stride_nd
        return operators.MaximalConfig.default(lattice, "uncentered", self.steps_per_octave, stride)


@dataclass
class ExperimentConfig:
    """One experiment: kind, discretization, function, space and parameters."""

    kind: str
    dim: int = 1
    grids: List[int] = dc_field(default_factory=list)
    window: Optional[Tuple[float, float]] = None
    function: Optional[FunctionSpec] = None
    functions: List[FunctionSpec] = dc_field(default_factory=list)
    space: Optional[SpaceSpec] = None
    spaces: List[SpaceSpec] = dc_field(default_factory=list)
    weight: Optional[WeightSpec] = None
    q: Optional[float] = None
    s: Optional[float] = None
    p: Optional[float] = None
    theta: Optional[float] = None
    s1: Optional[float] = None
    q1: Optional[float] = None
    t: Optional[float] = None
    radii: List[float] = dc_field(default_factory=list)
    epsilons: List[float] = dc_field(default_factory=list)
    samples: int = 0
    lambda_points: Optional[int] = None
    mode: Optional[str] = None
    tolerances: Dict[str, float] = dc_field(default_factory=dict)
    seed: int = 0
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        """Parse the JSON form.

        Raises:
            ValueError: On unknown kinds, keys or malformed fields
        """
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown experiment keys: {sorted(unknown)}")
        if data.get("kind") not in KINDS:
            raise ValueError(f"Unknown experiment kind '{data.get('kind')}'; expected one of {KINDS}")

        def function_of(value):
            if isinstance(value, str):
                return catalog_spec(value, int(data.get("dim", 1)))
            return FunctionSpec.from_dict(value)

        def optional_float(key):
            value = data.get(key)
            if value is None:
                return None
            return math.inf if value in ("inf", "Infinity") else float(value)

        window = data.get("window")
        return cls(
            kind=data["kind"],
            dim=int(data.get("dim", 1)),
            grids=[int(n) for n in data.get("grids", [])],
            window=tuple(float(w) for w in window) if window is not None else None,
            function=function_of(data["function"]) if data.get("function") is not None else None,
            functions=[function_of(f) for f in data.get("functions", [])],
            space=space_from_dict(data["space"]) if data.get("space") is not None else None,
            spaces=[space_from_dict(s) for s in data.get("spaces", [])],
            weight=WeightSpec.from_dict(data["weight"]) if data.get("weight") is not None else None,
            q=optional_float("q"),
            s=optional_float("s"),
            p=optional_float("p"),
            theta=optional_float("theta"),
            s1=optional_float("s1"),
            q1=optional_float("q1"),
            t=optional_float("t"),
            radii=[float(r) for r in data.get("radii", [])],
            epsilons=[float(e) for e in data.get("epsilons", [])],
            samples=int(data.get("samples", 0)),
            lambda_points=int(data["lambda_points"]) if data.get("lambda_points") is not None else None,
            mode=data.get("mode"),
            tolerances={k: float(v) for k, v in data.get("tolerances", {}).items()},
            seed=int(data.get("seed", 0)),
            output=data.get("output"),
        )

    def to_dict(self) -> Dict:
        def number(value):
            if value is None:
                return None
            return "inf" if math.isinf(value) else value

        return {
            "kind": self.kind,
            "dim": self.dim,
            "grids": list(self.grids),
            "window": list(self.window) if self.window is not None else None,
            "function": self.function.to_dict() if self.function else None,
            "functions": [f.to_dict() for f in self.functions],
            "space": self.space.to_dict() if self.space else None,
            "spaces": [s.to_dict() for s in self.spaces],
            "weight": self.weight.to_dict() if self.weight else None,
            "q": number(self.q),
            "s": number(self.s),
            "p": number(self.p),
            "theta": number(self.theta),
            "s1": number(self.s1),
            "q1": number(self.q1),
            "t": number(self.t),
            "radii": list(self.radii),
            "epsilons": list(self.epsilons),
            "samples": self.samples,
            "lambda_points": self.lambda_points,
            "mode": self.mode,
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
            "output": self.output,
        }


@dataclass
class Assertion:
    name: str
    verdict: str
    measured: Optional[float]
    threshold: Optional[float]
    detail: str = ""


@dataclass
class ExperimentReport:
    """Measurements, verdicts and the convergence table of one experiment."""

    config: Dict
    rows: List[Dict] = dc_field(default_factory=list)
    measurements: Dict = dc_field(default_factory=dict)
    assertions: List[Assertion] = dc_field(default_factory=list)
    wall_times: Dict[str, float] = dc_field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    rss_mb: float = 0.0

    @property
    def status(self) -> str:
        verdicts = {a.verdict for a in self.assertions}
        if FAIL in verdicts:
            return FAIL
        if UNRELIABLE in verdicts:
            return UNRELIABLE
        return PASS

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, UNRELIABLE: 2}[self.status]

    def to_dict(self) -> Dict:
        return {
            "config": self.config,
            "status": self.status,
            "assertions": [asdict(a) for a in self.assertions],
            "measurements": self.measurements,
            "rows": self.rows,
            "seed": self.seed,
            "threads": self.threads,
            "rss_mb": self.rss_mb,
            "wall_times": self.wall_times,
        }

    def write(self, out_dir) -> Tuple[Path, Path]:
        """Write report.json and convergence.csv into out_dir."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / "report.json"
        csv_path = out / "convergence.csv"
        with open(json_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_jsonable(self.to_dict()), f, indent=2, allow_nan=False)
            f.write("\n")
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["grid", "lhs", "rhs", "ratio", "rel_err"])
            for row in self.rows:
                writer.writerow([row.get(k) for k in ("grid", "lhs", "rhs", "ratio", "rel_err")])
        logger.info(f"Report written to {json_path}")
        return json_path, csv_path


def to_jsonable(value):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _check(name: str, ok: bool, measured, threshold, detail: str = "",
           unreliable: bool = False) -> Assertion:
    if unreliable:
        verdict = UNRELIABLE
    else:
        verdict = PASS if ok else FAIL
    measured = None if measured is None else float(measured)
    threshold = None if threshold is None else float(threshold)
    return Assertion(name, verdict, measured, threshold, detail)


def _row(grid, lhs, rhs) -> Dict:
    ratio = lhs / rhs if rhs not in (0, None) and lhs is not None else None
    rel_err = abs(ratio - 1.0) if ratio is not None else None
    return {"grid": grid, "lhs": lhs, "rhs": rhs, "ratio": ratio, "rel_err": rel_err}


def _within_band(values: Sequence[float], band: float) -> Tuple[bool, float]:
    """Whether every value lies within +-band of the mean; also the worst deviation."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if mean == 0:
        return bool(np.all(values == 0)), 0.0
    worst = float(np.max(np.abs(values / mean - 1.0)))
    return worst <= band, worst


# Validation

def _check_admissible(n: int, p: float, q: float) -> None:
    if not n * (1.0 / p - 1.0 / q) < 1:
        raise HypothesisError(
            f"n(1/p - 1/q) < 1 violated: n={n}, p={p}, q={q} gives {n * (1.0 / p - 1.0 / q):.6g}"
        )


def sobolev_exponents(q1: float, theta: float) -> Tuple[float, float]:
    """(q, s) with 1/q = (1-theta)/q1 + theta and s = theta."""
    inv_q = (1.0 - theta) / q1 + theta
    return 1.0 / inv_q, theta


def gn_exponents(s1: float, q1: float, theta: float) -> Tuple[float, float]:
    """(q, s) with 1/q = (1-theta)/q1 + theta and s = (1-theta) s1 + theta."""
    inv_q = (1.0 - theta) / q1 + theta
    return 1.0 / inv_q, (1.0 - theta) * s1 + theta


def _check_relations(config: ExperimentConfig, q: float, s: float) -> None:
    """Explicit q and s must satisfy the interpolation relations."""
    if config.q is not None and abs(1.0 / config.q - 1.0 / q) > RELATION_TOLERANCE:
        raise HypothesisError(f"1/q = (1-theta)/q1 + theta violated: q={config.q}, expected {q}")
    if config.s is not None and abs(config.s - s) > RELATION_TOLERANCE:
        raise HypothesisError(f"s relation violated: s={config.s}, expected {s}")


def validate(config: ExperimentConfig) -> None:
    """Reject configurations outside the hypotheses of the checked statement.

    Raises:
        HypothesisError: Naming the violated condition
    """
    if config.kind not in KINDS:
        raise ValueError(f"Unknown experiment kind '{config.kind}'")
    if config.dim not in (1, 2, 3):
        raise HypothesisError(f"dimension n in {{1, 2, 3}} violated: n={config.dim}")
    if config.kind in ("limit-identity", "sandwich"):
        q = config.q if config.q is not None else 1.0
        spaces = [config.space] if config.kind == "limit-identity" else config.spaces
        for space in spaces:
            if space is not None:
                _check_admissible(config.dim, space_exponent(space), q)
        if config.kind == "limit-identity" and config.space is None:
            _check_admissible(config.dim, config.p if config.p is not None else 1.0, q)
    if config.kind == "sobolev-interp":
        q1 = config.q1 if config.q1 is not None else math.inf
        theta = config.theta if config.theta is not None else 0.5
        if not 0 < theta < 1:
            raise HypothesisError(f"theta in (0, 1) violated: theta={theta}")
        if not q1 >= 1:
            raise HypothesisError(f"q1 in [1, inf] violated: q1={q1}")
        q, s = sobolev_exponents(q1, theta)
        if not 1 <= q <= q1:
            raise HypothesisError(f"q in [1, q1] violated: q={q}, q1={q1}")
        _check_relations(config, q, s)
    if config.kind == "gn-interp":
        s1 = config.s1 if config.s1 is not None else 0.25
        q1 = config.q1 if config.q1 is not None else 2.0
        theta = config.theta if config.theta is not None else 0.5
        if not 0 < theta < 1:
            raise HypothesisError(f"theta in (0, 1) violated: theta={theta}")
        if not 0 <= s1 < 1:
            raise HypothesisError(f"s1 in [0, 1) violated: s1={s1}")
        if not 1 < q1 < math.inf:
            raise HypothesisError(f"q1 in (1, inf) violated: q1={q1}")
        q, s = gn_exponents(s1, q1, theta)
        if not s1 < s < 1:
            raise HypothesisError(f"s in (s1, 1) violated: s={s}")
        if not 1 < q < q1:
            raise HypothesisError(f"q in (1, q1) violated: q={q}")
        _check_relations(config, q, s)
    if config.kind == "ap-necessity":
        for eps in config.epsilons:
            if not 0 < eps <= 1:
                raise HypothesisError(f"epsilon in (0, 1] violated: epsilon={eps}")
        if config.dim != 1:
            raise HypothesisError(f"A_p necessity construction needs n = 1, got n={config.dim}")
    if config.kind == "rubio" and config.dim != 1:
        raise HypothesisError(f"Rubio de Francia check needs n = 1 (cubes are balls), got n={config.dim}")
    if config.kind == "riesz-bound" and config.dim < 2:
        raise HypothesisError(f"Riesz potential bound needs n >= 2, got n={config.dim}")
    if config.p is not None and not config.p >= 1:
        raise HypothesisError(f"p >= 1 violated: p={config.p}")
    if config.q is not None and not config.q > 0:
        raise HypothesisError(f"q > 0 violated: q={config.q}")


# Shared helpers

def _lattice(dim: int, window: Tuple[float, float], points: int) -> Lattice:
    return make_lattice(dim, window[0], window[1], points)


def _tolerance(config: ExperimentConfig, settings: HarnessSettings, name: str, fallback: float) -> float:
    if name in config.tolerances:
        return config.tolerances[name]
    return settings.tolerances.get(name, fallback)


def _weak(f: GridFunction, space: SpaceSpec, q: float, s: float, config: ExperimentConfig,
          settings: HarnessSettings, limit: bool = True, lambdas: Optional[np.ndarray] = None,
          region: Optional[np.ndarray] = None) -> bsvy.LevelSetProfile:
    return bsvy.weak_functional(
        f, space, q, s, lambdas,
        mode=config.mode or settings.mode,
        self_cell_correction=settings.self_cell_correction,
        points=config.lambda_points or settings.lambda_points,
        min_reach_cells=settings.min_reach_cells,
        max_reach_fraction=settings.max_reach_fraction,
        spread_threshold=settings.spread_threshold,
        limit=limit,
        region=region,
    )


def _origin(dim: int) -> Tuple[float, ...]:
    return (0.0,) * dim


def _default_grid(settings: HarnessSettings, dim: int) -> int:
    ladder = settings.ladder(dim)
    return ladder[min(1, len(ladder) - 1)] if dim == 1 else ladder[0]


def _smooth_cutoff(x: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 on |x| <= inner, 0 on |x| >= outer, smooth in between."""

    def psi(t):
        out = np.zeros_like(t)
        positive = t > 0
        out[positive] = np.exp(-1.0 / t[positive])
        return out

    a = psi(outer - np.abs(x))
    b = psi(np.abs(x) - inner)
    return a / (a + b)


# Experiments

def _limit_identity(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    spec = config.function or FunctionSpec("smoothed-hat", center=_origin(dim), radius=1.0, k=16)
    space = config.space or Lebesgue(config.p if config.p is not None else 1.0)
    q = config.q if config.q is not None else 1.0
    if isinstance(space, WeightedLebesgue):
        name = "limit_identity_weighted"
    else:
        name = "limit_identity" if dim == 1 else "limit_identity_2d"
    tol = _tolerance(config, settings, name, 0.03)

    errors = []
    missing = []
    for points in config.grids or settings.ladder(dim):
        started = time.perf_counter()
        f = sample(spec, _lattice(dim, window, points))
        profile = _weak(f, space, q, 1.0, config, settings)
        reference = bsvy.limit_reference(f, space, q)
        report.wall_times[f"grid_{points}"] = time.perf_counter() - started
        report.rows.append(_row(points, profile.limit_estimate, reference))
        if profile.limit_estimate is None:
            missing.append(points)
            continue
        errors.append(abs(profile.limit_estimate / reference - 1.0))
        logger.info(f"limit-identity grid {points}: limit={profile.limit_estimate:.6g}, "
                    f"reference={reference:.6g}, error={errors[-1]:.3g}")

    report.measurements.update({"q": q, "space": space.to_dict(), "errors": errors})
    if missing:
        report.assertions.append(_check("limit_extracted", False, len(missing), 0,
                                        f"no reliable limit on grids {missing}", unreliable=True))
    if errors:
        report.assertions.append(_check("finest_grid_error", errors[-1] <= tol, errors[-1], tol))
    if len(errors) > 1:
        improves = errors[-1] <= errors[0] or errors[-1] <= 0.1 * tol
        report.assertions.append(_check("error_decreases", improves, errors[-1], errors[0]))


def _sandwich_spaces(dim: int) -> List[SpaceSpec]:
    return [
        Lebesgue(1.0),
        Lebesgue(2.0),
        WeightedLebesgue(1.5, WeightSpec("power", a=-0.5, center=(0.37,) * dim)),
        Morrey(1.0, 2.0),
        Orlicz(OrliczSpec("power", 2.0)),
        MixedNorm((2.0,) * dim),
    ]


def _sandwich(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    q = config.q if config.q is not None else 1.0
    points = config.grids[0] if config.grids else _default_grid(settings, dim)
    lattice = _lattice(dim, window, points)
    spaces = config.spaces or _sandwich_spaces(dim)
    functions = config.functions or smooth_catalog(dim)
    constant = (bsvy.sphere_constant(float(q), dim).value / dim) ** (1.0 / q)
    slack = _tolerance(config, settings, "sandwich_lower_slack", 0.95)
    factor = _tolerance(config, settings, "sandwich_upper_factor", 20.0)
    spread_limit = _tolerance(config, settings, "sandwich_spread", 10.0)

    lowest, highest, widest = math.inf, 0.0, 0.0
    for space in spaces:
        started = time.perf_counter()
        ratios = []
        for spec in functions:
            f = sample(spec, lattice)
            sup = _weak(f, space, q, 1.0, config, settings, limit=False).sup_value
            grad = bsvy.gradient_norm(f, space)
            report.rows.append(_row(points, sup, grad))
            ratios.append(sup / grad)
        ratios = np.asarray(ratios)
        lowest = min(lowest, float(ratios.min()) / constant)
        highest = max(highest, float(ratios.max()))
        widest = max(widest, float(ratios.max() / ratios.min()))
        report.wall_times[space.label()] = time.perf_counter() - started
        logger.info(f"sandwich {space.label()}: ratios in [{ratios.min():.4g}, {ratios.max():.4g}]")

    report.measurements.update({"q": q, "grid": points, "lower_constant": constant})
    report.assertions.append(_check("lower_bound", lowest >= slack, lowest, slack,
                                    "sup over lambda against (K/n)^(1/q) |||grad f|||"))
    report.assertions.append(_check("upper_bound", highest <= factor, highest, factor))
    report.assertions.append(_check("ratio_spread", widest <= spread_limit, widest, spread_limit))


def _s1_divergence(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    spec = config.function or FunctionSpec("hat", center=_origin(dim), radius=1.0)
    q = config.q if config.q is not None else 2.0
    space = Lebesgue(q)
    band = _tolerance(config, settings, "s1_increment_band", 0.25)
    half_tol = _tolerance(config, settings, "s_half_change", 0.02)

    grids = config.grids or settings.ladder(dim)
    values, halves, spacings = [], [], []
    expected = None
    for points in grids:
        started = time.perf_counter()
        f = sample(spec, _lattice(dim, window, points))
        values.append(bsvy.strong_functional(f, space, q, 1.0))
        halves.append(bsvy.strong_functional(f, space, q, 0.5))
        spacings.append(max(f.lattice.spacing))
        if expected is None:
            k = bsvy.sphere_constant(float(q), dim).value
            expected = k * bsvy.gradient_norm(f, space) ** q
        report.wall_times[f"grid_{points}"] = time.perf_counter() - started
        report.rows.append(_row(points, values[-1], halves[-1]))

    growing = all(b > a for a, b in zip(values, values[1:]))
    report.assertions.append(_check("strict_growth", growing, len(values), None,
                                    f"s = 1 values {values}"))
    increments = []
    for i in range(1, len(values)):
        per_log = (values[i] ** q - values[i - 1] ** q) / math.log(spacings[i - 1] / spacings[i])
        increments.append(per_log / expected)
    if increments:
        worst = max(abs(r - 1.0) for r in increments)
        report.assertions.append(_check("log_increment", worst <= band, worst, band,
                                        "increment of value^q per unit log(1/h) against K(q,n) |||grad f|||^q"))
    if len(halves) > 1:
        change = max(abs(b / a - 1.0) for a, b in zip(halves, halves[1:]))
        report.assertions.append(_check("s_half_converges", change <= half_tol, change, half_tol,
                                        "worst change of the s = 1/2 value per doubling"))
    growth = [b / a - 1.0 for a, b in zip(values, values[1:])]
    report.measurements.update({"q": q, "values": values, "growth": growth,
                                "increments": increments, "s_half": halves})


def _poincare(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-5.0, 5.0)
    radii = config.radii or [0.5, 1.0, 2.0]
    spaces = config.spaces or [Lebesgue(2.0), Orlicz(OrliczSpec("power", 2.0))]
    base = config.function or FunctionSpec(
        "smooth-bump", center=tuple(0.3 if i == 0 else 0.0 for i in range(dim)), radius=1.5)
    points = config.grids[0] if config.grids else settings.ladder(dim)[-1]
    lattice = _lattice(dim, window, points)
    dist = np.sqrt(np.sum(lattice.coordinates() ** 2, axis=-1))
    ones = GridFunction(lattice, np.ones(lattice.shape))
    tol = _tolerance(config, settings, "poincare_slope", 0.15)

    domains = ["ball"] + (["annulus"] if dim >= 2 else [])
    for domain in domains:
        for space in spaces:
            started = time.perf_counter()
            constants = []
            for radius in radii:
                spec = base.scaled(radius)
                f = sample(spec, lattice)
                if domain == "ball":
                    mask = dist < 2.0 * radius
                else:
                    mask = (dist > radius) & (dist < 2.0 * radius)
                mean = integrate(f, mask=mask) / integrate(ones, mask=mask)
                lhs = norm(space, GridFunction(lattice, np.where(mask, f.values - mean, 0.0)))
                grad = sample_gradient(spec, lattice).magnitude.values
                rhs = radius * norm(space, GridFunction(lattice, np.where(mask, grad, 0.0)))
                constants.append(lhs / rhs)
                report.rows.append(_row(points, lhs, rhs))
            slope = float(np.polyfit(np.log(radii), np.log(constants), 1)[0])
            label = f"{domain}:{space.label()}"
            report.wall_times[label] = time.perf_counter() - started
            report.measurements[label] = {"constants": constants, "slope": slope}
            logger.info(f"poincare {label}: constants {constants}, slope {slope:.3g}")
            report.assertions.append(_check(f"scale_invariance[{label}]", abs(slope) <= tol,
                                            abs(slope), tol,
                                            "||(f - f_Omega) 1_Omega|| / (R |||grad f| 1_Omega||)"))


def ap_necessity_probe(epsilon: float, p: float = 1.0, points: int = 2049,
                       settings: Optional[HarnessSettings] = None) -> Tuple[float, float, float]:
    """Weak-functional supremum of a ramp against its weighted gradient energy.

    The ramp rises over (-1, -1/8) where the step weight is epsilon and is
    flat where the weight is 1, so the energy vanishes with epsilon while
    level-set pairs straddling the step do not.

    Returns:
        Tuple[float, float, float]: (ratio, supremum^p, energy)

    Raises:
        HypothesisError: If epsilon is outside (0, 1] or p < 1
    """
    if not 0 < epsilon <= 1:
        raise HypothesisError(f"epsilon in (0, 1] violated: epsilon={epsilon}")
    if not p >= 1:
        raise HypothesisError(f"p >= 1 violated: p={p}")
    settings = settings or HarnessSettings()
    lattice = make_lattice(1, AP_WINDOW[0], AP_WINDOW[1], points)
    x = lattice.axes()[0]
    step = GridFunction(lattice, ((x > -1.0) & (x < -0.125)).astype(np.float64))
    g = mollify(step, AP_MOLLIFIER).values * _smooth_cutoff(x, 3.0, 4.0)
    f = GridFunction(lattice, cumulative_trapezoid(g, x, initial=0.0))
    weight = WeightSpec("step", center=(0.0,), v_minus=epsilon, v_plus=1.0)
    space = WeightedLebesgue(p, weight)
    profile = bsvy.weak_functional(
        f, space, p, 1.0,
        mode=settings.mode,
        self_cell_correction=settings.self_cell_correction,
        points=settings.lambda_points,
        min_reach_cells=settings.min_reach_cells,
        max_reach_fraction=settings.max_reach_fraction,
        limit=False,
    )
    energy = weighted_lp_norm(GridFunction(lattice, g), p, sample_weight(weight, lattice)) ** p
    numerator = profile.sup_value ** p
    return numerator / energy, numerator, energy


def _ap_necessity(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    epsilons = sorted(config.epsilons or [1.0, 1e-2, 1e-3], reverse=True)
    p = config.p if config.p is not None else 1.0
    points = config.grids[0] if config.grids else 2049
    growth = _tolerance(config, settings, "ap_growth", 5.0)
    ratios = []
    for eps in epsilons:
        started = time.perf_counter()
        ratio, numerator, energy = ap_necessity_probe(eps, p, points, settings)
        ratios.append(ratio)
        report.rows.append(_row(points, numerator, energy))
        report.wall_times[f"epsilon_{eps:g}"] = time.perf_counter() - started
        logger.info(f"ap-necessity epsilon={eps:g}: ratio={ratio:.6g}")
    steps = [b / a for a, b in zip(ratios, ratios[1:])]
    report.measurements.update({"p": p, "epsilons": epsilons, "ratios": ratios, "growth": steps})
    if steps:
        report.assertions.append(_check("ratio_unbounded", min(steps) >= growth, min(steps), growth,
                                        "ratio growth per step in epsilon"))


def _interpolation(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport,
                   gagliardo_nirenberg: bool) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    space = config.space or Lebesgue(2.0)
    theta = config.theta if config.theta is not None else 0.5
    if gagliardo_nirenberg:
        s1 = config.s1 if config.s1 is not None else 0.25
        q1 = config.q1 if config.q1 is not None else 2.0
        q, s = gn_exponents(s1, q1, theta)
    else:
        s1 = None
        q1 = config.q1 if config.q1 is not None else math.inf
        q, s = sobolev_exponents(q1, theta)
    band = _tolerance(config, settings, "interp_band", 0.5)
    functions = config.functions or smooth_catalog(dim)[:5]
    grids = config.grids or settings.ladder(dim)[:2]

    per_grid = []
    for points in grids:
        started = time.perf_counter()
        lattice = _lattice(dim, window, points)
        ratios = []
        for spec in functions:
            f = sample(spec, lattice)
            lhs = _weak(f, convexify(space, q), q, s, config, settings, limit=False).sup_value
            if gagliardo_nirenberg:
                low = _weak(f, convexify(space, q1), q1, s1, config, settings, limit=False).sup_value
            elif math.isinf(q1):
                low = f.max_abs()
            else:
                low = norm(convexify(space, q1), f)
            rhs = low ** (1.0 - theta) * bsvy.gradient_norm(f, space) ** theta
            report.rows.append(_row(points, lhs, rhs))
            ratios.append(lhs / rhs)
        per_grid.append(ratios)
        report.wall_times[f"grid_{points}"] = time.perf_counter() - started
        ok, worst = _within_band(ratios, band)
        report.assertions.append(_check(f"ratio_band[{points}]", ok, worst, band))

    report.measurements.update({"q": q, "s": s, "q1": q1, "s1": s1, "theta": theta, "ratios": per_grid})
    if len(per_grid) > 1:
        change = float(np.max(np.abs(np.asarray(per_grid[-1]) / np.asarray(per_grid[-2]) - 1.0)))
        report.assertions.append(_check("refinement_change", change <= band, change, band))


def _rubio(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    window = config.window or (-4.0, 4.0)
    points = config.grids[0] if config.grids else 129
    p = config.p if config.p is not None else 2.0
    if not p > 1:
        raise HypothesisError(f"p > 1 violated for maximal boundedness: p={p}")
    samples = config.samples or 100
    slack = _tolerance(config, settings, "rubio_a1_slack", 0.25)
    lattice = _lattice(1, window, points)
    mcfg = settings.maximal_config(lattice)
    envelope = sample(FunctionSpec("smooth-bump", center=(0.0,), radius=2.0), lattice).values
    weights = [config.weight] if config.weight else [
        WeightSpec("constant"), WeightSpec("power", a=-0.5, center=(0.0,))]
    rng = np.random.default_rng(config.seed)
    family = CubeFamily(settings.corner_stride, settings.min_side_cells)

    for spec in weights:
        started = time.perf_counter()
        space = WeightedLebesgue(p, spec)
        omega = sample_weight(spec, lattice)
        dominated, norm_excess, a1_excess = True, 0.0, 0.0
        for _ in range(samples):
            g = GridFunction(lattice, rng.standard_normal(lattice.shape) * envelope)
            probes = [g]
            for _ in range(3):
                probes.append(operators.maximal(probes[-1], mcfg))
            m_norm = settings.rdf_headroom * operators.operator_norm_probe(space, probes, mcfg)
            cfg = operators.RdFConfig(p, m_norm, settings.rdf_k_max, omega)
            result = operators.rubio_de_francia(g, cfg, mcfg)
            rg = result.values
            dominated &= bool(np.all(np.abs(g.values) <= rg.values * (1 + 1e-12)))
            g_norm = weighted_lp_norm(g, p, omega)
            norm_excess = max(norm_excess, weighted_lp_norm(rg, p, omega) / ((2.0 + cfg.tail_factor) * g_norm))
            a1_excess = max(a1_excess, a1_constant(rg, family) / (2.0 * m_norm))
        label = spec.family
        report.wall_times[label] = time.perf_counter() - started
        report.measurements[label] = {"norm_ratio": norm_excess, "a1_ratio": a1_excess}
        logger.info(f"rubio weight={label}: norm ratio {norm_excess:.4g}, A_1 ratio {a1_excess:.4g}")
        report.assertions.append(_check(f"dominates[{label}]", dominated, None, None))
        report.assertions.append(_check(f"norm_bound[{label}]", norm_excess <= 1.0, norm_excess, 1.0))
        report.assertions.append(_check(f"a1_bound[{label}]", a1_excess <= 1.0 + slack,
                                        a1_excess, 1.0 + slack))


def _dyadic_cover(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    samples = config.samples or 10000
    limit = _tolerance(config, settings, "cover_ratio", 6.01)
    rng = np.random.default_rng(config.seed)
    for dim in sorted({1, 2, config.dim}):
        started = time.perf_counter()
        partial, uncovered, ambiguous = 0, 0, 0
        worst = 0.0
        for _ in range(samples):
            center = tuple(float(c) for c in rng.uniform(-8.0, 8.0, dim))
            radius = float(2.0 ** rng.uniform(-6.0, 6.0))
            cube, ratio = dyadic.cover_ball(center, radius, dim)
            worst = max(worst, ratio)
            box = dyadic.cube_geometry(cube)
            if not box.closure_contains_ball(center, Fraction(radius)):
                uncovered += 1
            if dyadic.locate(box.lower, cube.alpha, cube.j) != cube:
                ambiguous += 1
            for axis in range(dim):
                for delta in (-1, 1):
                    k = list(cube.k)
                    k[axis] += delta
                    neighbour = dyadic.DyadicCube(cube.alpha, cube.j, tuple(k))
                    if dyadic.nesting_check(cube, neighbour) != dyadic.Nesting.DISJOINT:
                        ambiguous += 1
            for j in range(cube.j - 2, cube.j + 3):
                other = dyadic.locate(tuple(rng.uniform(-8.0, 8.0, dim)), cube.alpha, j)
                try:
                    dyadic.nesting_check(cube, other)
                    dyadic.nesting_check(cube, dyadic.parent(other))
                except dyadic.PartialOverlapError:
                    partial += 1
        report.wall_times[f"dim_{dim}"] = time.perf_counter() - started
        report.measurements[f"dim_{dim}"] = {"worst_ratio": worst, "partial_overlaps": partial,
                                             "uncovered": uncovered, "ambiguous": ambiguous}
        logger.info(f"dyadic-cover n={dim}: worst ratio {worst:.4g}, partial overlaps {partial}")
        report.assertions.append(_check(f"no_partial_overlap[{dim}]", partial == 0, partial, 0))
        report.assertions.append(_check(f"ball_covered[{dim}]", uncovered == 0, uncovered, 0))
        report.assertions.append(_check(f"cover_ratio[{dim}]", worst <= limit, worst, limit))
        report.assertions.append(_check(f"tiling_unique[{dim}]", ambiguous == 0, ambiguous, 0))


def _space_identities(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    p = config.p if config.p is not None else 2.0
    t = config.t if config.t is not None else 0.25
    points = config.grids[0] if config.grids else _default_grid(settings, dim)
    samples = config.samples or 20
    exact_tol = _tolerance(config, settings, "identity", 1e-8)
    bisection_tol = _tolerance(config, settings, "identity_bisection", 1e-6)
    lattice = _lattice(dim, window, points)
    envelope = sample(FunctionSpec("smooth-bump", center=_origin(dim), radius=1.0), lattice).values
    rng = np.random.default_rng(config.seed)
    phi = OrliczSpec("power", p)

    # (name, left space, right space, tolerance); the right side is L^p unless a convexification
    checks = [
        ("morrey_equals_lp", Morrey(p, p), exact_tol),
        ("mixed_equals_lp", MixedNorm((p,) * dim), exact_tol),
        ("variable_constant_equals_lp", VariableLebesgue(ExponentSpec("constant", p)), bisection_tol),
        ("orlicz_power_equals_lp", Orlicz(phi), bisection_tol),
        ("slice_equals_lp", OrliczSlice(phi, p, t), bisection_tol),
    ]
    convex = [
        ("convexify_lebesgue", Lebesgue(p), exact_tol),
        ("convexify_morrey", Morrey(1.0, 2.0), exact_tol),
        ("convexify_mixed", MixedNorm((p,) * dim), exact_tol),
        ("convexify_orlicz", Orlicz(phi), bisection_tol),
    ]
    worst = {name: 0.0 for name, _, _ in checks + convex}
    started = time.perf_counter()
    for _ in range(samples):
        f = GridFunction(lattice, rng.standard_normal(lattice.shape) * envelope)
        reference = norm(Lebesgue(p), f)
        for name, space, _ in checks:
            worst[name] = max(worst[name], abs(norm(space, f) / reference - 1.0))
        powered = GridFunction(lattice, np.abs(f.values) ** 2)
        for name, space, _ in convex:
            direct = norm(convexify(space, 2.0), f)
            via_power = norm(space, powered) ** 0.5
            worst[name] = max(worst[name], abs(direct / via_power - 1.0))
    report.wall_times["identities"] = time.perf_counter() - started
    report.measurements.update({"p": p, "t": t, "worst": worst})
    for name, _, tol in checks + convex:
        report.assertions.append(_check(name, worst[name] <= tol, worst[name], tol))


def _duality(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    window = config.window or (-8.0, 8.0)
    points = config.grids[0] if config.grids else 4097
    radii = config.radii or [0.05, 0.5, 5.0]
    spaces = config.spaces or [
        Lebesgue(2.0),
        WeightedLebesgue(2.0, WeightSpec("power", a=0.5, center=(0.0,))),
        Orlicz(OrliczSpec("power", 2.0)),
        Orlicz(OrliczSpec("power_log", 2.0)),
    ]
    exact_tol = _tolerance(config, settings, "identity", 1e-8)
    upper = _tolerance(config, settings, "duality_upper", 10.0)
    band = _tolerance(config, settings, "duality_band", 0.5)
    lattice = _lattice(config.dim, window, points)
    center = _origin(config.dim)
    for space in spaces:
        started = time.perf_counter()
        products = [indicator_duality(space, lattice, center, r) for r in radii]
        label = space.label()
        report.wall_times[label] = time.perf_counter() - started
        report.measurements[label] = products
        for r, value in zip(radii, products):
            report.rows.append({"grid": points, "lhs": value, "rhs": 1.0, "ratio": value,
                                "rel_err": abs(value - 1.0), "radius": r})
        if isinstance(space, Lebesgue):
            worst = max(abs(v - 1.0) for v in products)
            report.assertions.append(_check(f"exact[{label}]", worst <= exact_tol, worst, exact_tol))
            continue
        lowest, highest = min(products), max(products)
        report.assertions.append(_check(f"lower[{label}]", lowest >= 1.0 - exact_tol, lowest, 1.0))
        report.assertions.append(_check(f"upper[{label}]", highest <= upper, highest, upper))
        ok, worst = _within_band(products, band)
        report.assertions.append(_check(f"uniform[{label}]", ok, worst, band))


def _riesz_bound(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.5, 2.5)
    points = config.grids[0] if config.grids else 129
    radii = config.radii or [0.5, 1.0, 2.0]
    space = config.space or Lebesgue(config.p if config.p is not None else 2.0)
    band = _tolerance(config, settings, "riesz_band", 0.25)
    lattice = _lattice(dim, window, points)
    origin = _origin(dim)
    # Densities on the unit ball, dilated with Omega = B(0, R); None is the indicator
    shapes = config.functions or [config.function or FunctionSpec("smooth-bump", origin, 1.0)]
    densities = [("indicator", None)] + [(spec.family, spec) for spec in shapes]

    for label, spec in densities:
        started = time.perf_counter()
        constants = []
        for radius in radii:
            mask = ball_indicator(lattice, origin, radius).values > 0
            if spec is None:
                values = np.ones(lattice.shape)
            else:
                values = np.abs(sample(spec.scaled(radius), lattice).values)
            g = GridFunction(lattice, np.where(mask, values, 0.0))
            potential = operators.riesz_potential(g, mask)
            lhs = norm(space, potential)
            rhs = 2.0 * radius * norm(space, g)
            constants.append(lhs / rhs)
            report.rows.append(_row(points, lhs, rhs))
        ok, worst = _within_band(constants, band)
        key = f"{label}:{space.label()}"
        report.wall_times[key] = time.perf_counter() - started
        report.measurements[key] = {"radii": radii, "constants": constants}
        logger.info(f"riesz-bound {key}: constants {constants}")
        report.assertions.append(_check(f"uniform_constant[{key}]", ok, worst, band,
                                        "||I_1(|g| 1_Omega) 1_Omega|| / (diam(Omega) ||g 1_Omega||)"))


def _br_uniform(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-4.0, 4.0)
    points = config.grids[0] if config.grids else 1025
    radii = sorted(config.radii or [0.01, 0.1, 1.0])
    band = _tolerance(config, settings, "br_band", 0.25)
    phi = OrliczSpec("power", 2.0)
    spaces = config.spaces or [
        Orlicz(phi),
        OrliczSlice(phi, 2.0, 0.25),
        VariableLebesgue(ExponentSpec("smoothed_step", 2.0, 3.0)),
    ]
    functions = config.functions or smooth_catalog(dim)[:5]
    lattice = _lattice(dim, window, points)
    samples = [sample(spec, lattice) for spec in functions]
    for space in spaces:
        started = time.perf_counter()
        worst = 0.0
        for f in samples:
            base = norm(space, f)
            ratios = [norm(space, operators.ball_average(f, r)) / base for r in radii]
            worst = max(worst, max(ratios) / ratios[0])
            report.rows.extend(_row(points, value, 1.0) for value in ratios)
        label = space.label()
        report.wall_times[label] = time.perf_counter() - started
        report.measurements[label] = worst
        report.assertions.append(_check(f"uniform[{label}]", worst <= 1.0 + band, worst, 1.0 + band))


def _lusin_lipschitz(config: ExperimentConfig, settings: HarnessSettings, report: ExperimentReport) -> None:
    dim = config.dim
    window = config.window or (-2.0, 2.0)
    functions = config.functions or smooth_catalog(dim)[:5]
    grids = config.grids or settings.ladder(dim)[:2]
    limit = _tolerance(config, settings, "lusin_change", 0.5)
    per_grid = []
    for points in grids:
        started = time.perf_counter()
        lattice = _lattice(dim, window, points)
        mcfg = settings.maximal_config(lattice)
        ratios = [operators.lusin_lipschitz_ratio(sample(spec, lattice), mcfg, seed=config.seed)
                  for spec in functions]
        per_grid.append(ratios)
        report.rows.extend(_row(points, r, 1.0) for r in ratios)
        report.wall_times[f"grid_{points}"] = time.perf_counter() - started
    finite = all(math.isfinite(r) for ratios in per_grid for r in ratios)
    report.assertions.append(_check("finite_ratio", finite, max(max(r) for r in per_grid), None))
    report.measurements["ratios"] = per_grid
    if finite and len(per_grid) > 1:
        change = float(np.max(np.abs(np.asarray(per_grid[-1]) / np.asarray(per_grid[-2]) - 1.0)))
        report.assertions.append(_check("refinement_change", change <= limit, change, limit))


_RUNNERS = {
    "limit-identity": _limit_identity,
    "sandwich": _sandwich,
    "s1-divergence": _s1_divergence,
    "poincare": _poincare,
    "ap-necessity": _ap_necessity,
    "sobolev-interp": lambda c, s, r: _interpolation(c, s, r, gagliardo_nirenberg=False),
    "gn-interp": lambda c, s, r: _interpolation(c, s, r, gagliardo_nirenberg=True),
    "rubio": _rubio,
    "dyadic-cover": _dyadic_cover,
    "space-identities": _space_identities,
    "duality": _duality,
    "riesz-bound": _riesz_bound,
    "br-uniform": _br_uniform,
    "lusin-lipschitz": _lusin_lipschitz,
}


def load_experiment(path) -> ExperimentConfig:
    """Read an experiment configuration file.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: On invalid JSON or fields
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in experiment file {path}: {e}")
    return ExperimentConfig.from_dict(data)


def run_experiment(config: ExperimentConfig, settings: Optional[HarnessSettings] = None) -> ExperimentReport:
    """Validate, run and evaluate one experiment.

    Raises:
        HypothesisError: If the parameters violate the checked statement's hypotheses
    """
    if settings is None:
        from .config import Config
        settings = HarnessSettings.from_config(Config())
    validate(config)
    report = ExperimentReport(config=config.to_dict(), seed=config.seed, threads=numba.get_num_threads())
    logger.info(f"Running experiment {config.kind} (n={config.dim}, seed={config.seed})")
    started = time.perf_counter()
    _RUNNERS[config.kind](config, settings, report)
    report.wall_times["total"] = time.perf_counter() - started
    report.rss_mb = psutil.Process().memory_info().rss / 2 ** 20
    for assertion in report.assertions:
        if assertion.verdict != PASS:
            logger.warning(f"{config.kind}: {assertion.name} {assertion.verdict} "
                           f"(measured={assertion.measured}, threshold={assertion.threshold})")
    logger.info(f"Experiment {config.kind} finished: {report.status} in {report.wall_times['total']:.2f}s")
    return report
