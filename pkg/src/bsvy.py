"""Level-set functionals and their large-lambda limits.

For f on a lattice and lambda > 0 the level set E_f(lambda) holds the node
pairs (x, y), y != x, with |f(x) - f(y)| > lambda |x - y|^(n/q + s). The
weak functional is lambda * ||(measure of the x-slice)^(1/q)||_X; its
limit as lambda grows is (K(q,n)/n)^(1/q) ||grad f||_X for smooth f and
s = 1. The strong functional is the Gagliardo-type difference quotient.
"""
import csv
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.special import gamma, roots_jacobi

from . import kernels
from .field import GridFunction, gradient, sample_gradient
from .spaces import Lebesgue, SpaceSpec, norm

logger = logging.getLogger(__name__)

MODES = ("brute", "accelerated")

DEFAULT_LAMBDA_POINTS = 48
MIN_LAMBDA_POINTS = 16
DEFAULT_MIN_REACH_CELLS = 8
DEFAULT_MAX_REACH_FRACTION = 0.25
DEFAULT_SPREAD_THRESHOLD = 0.1
DEFAULT_MIN_DECADE_POINTS = 8

SPHERE_TOLERANCE = 1e-8
_JACOBI_NODES = 64
_TRAPEZOID_NODES = 4096


@dataclass(frozen=True)
class LevelSetParams:
    """Exponents and threshold of one level set."""

    q: float
    s: float
    lam: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if not self.s >= 0:
            raise ValueError(f"s must be non-negative, got {self.s}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def beta(self, n: int) -> float:
        """Distance exponent n/q + s."""
        return n / self.q + self.s


@dataclass
class LevelSetProfile:
    """Weak-functional values along a lambda grid."""

    lambda_grid: np.ndarray
    values: np.ndarray
    r_max_cells: Optional[np.ndarray] = None
    pair_counts: Optional[np.ndarray] = None
    sup_value: float = 0.0
    limit_estimate: Optional[float] = None
    limit_diagnostic: float = 0.0
    reliable: bool = True

    def __post_init__(self):
        self.lambda_grid = np.asarray(self.lambda_grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.lambda_grid.shape != self.values.shape:
            raise ValueError("Lambda grid and values must have the same length")
        if np.any(self.values < 0):
            raise ValueError("Profile values must be non-negative")
        if self.r_max_cells is None:
            self.r_max_cells = np.full(self.values.shape, np.nan)
        if self.pair_counts is None:
            self.pair_counts = np.zeros(self.values.shape, dtype=np.int64)
        self.sup_value = float(self.values.max()) if self.values.size else 0.0

    @property
    def sup_lambda(self) -> Optional[float]:
        """Lambda at which the largest value is attained."""
        if not self.values.size:
            return None
        return float(self.lambda_grid[int(np.argmax(self.values))])

    def summary(self) -> Dict:
        return {
            "sup": self.sup_value,
            "sup_lambda": self.sup_lambda,
            "limit": self.limit_estimate,
            "diagnostic": self.limit_diagnostic,
            "reliable": self.reliable,
        }

    def to_csv(self, path: Union[str, Path]) -> None:
        """Columns: lambda, value, r_max_cells, pair_count."""
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["lambda", "value", "r_max_cells", "pair_count"])
            for row in zip(self.lambda_grid, self.values, self.r_max_cells, self.pair_counts):
                writer.writerow([repr(float(row[0])), repr(float(row[1])),
                                 repr(float(row[2])), int(row[3])])


@dataclass(frozen=True)
class SphereConstant:
    """K(q,n): integral over the unit sphere of |xi . e|^q."""

    q: float
    n: int
    value: float
    method: str
    closed_form: float = 0.0
    quadrature: float = 0.0
    trapezoid: Optional[float] = None


# Level-set measures

def _region(f: GridFunction, region: Optional[np.ndarray]) -> np.ndarray:
    if region is None:
        return np.ones(f.lattice.shape, dtype=np.bool_)
    region = np.asarray(region, dtype=np.bool_)
    if region.shape != f.lattice.shape:
        raise ValueError(f"Region shape {region.shape} does not match lattice {f.lattice.shape}")
    return region


def _reach(f: GridFunction, beta: float, lam: float, mode: str) -> np.ndarray:
    shape3 = kernels.as3d(f.values).shape
    if mode == "brute":
        return np.array([m - 1 for m in shape3], dtype=np.int64)
    r_max = (2.0 * f.max_abs() / lam) ** (1.0 / beta)
    reach = []
    for m, h in zip(shape3, kernels.spacing3(f.lattice.spacing)):
        if m == 1:
            reach.append(0)
        else:
            reach.append(min(m - 1, int(math.ceil(r_max / h)) + 1))
    return np.array(reach, dtype=np.int64)


def level_set_counts(f: GridFunction, params: LevelSetParams, mode: str = "accelerated",
                     self_cell: bool = False, region: Optional[np.ndarray] = None) -> np.ndarray:
    """Per node, the number of nodes y with (x, y) in the level set.

    With a boolean ``region`` both x and y are restricted to it.

    Accelerated mode visits only |x - y| <= (2 max|f| / lambda)^(1/beta),
    outside of which no pair can qualify, so both modes agree exactly.
    """
    if mode not in MODES:
        raise ValueError(f"Unknown scan mode '{mode}'; expected one of {MODES}")
    beta = params.beta(f.lattice.dim)
    counts = kernels.level_set_counts(
        kernels.as3d(f.values),
        kernels.spacing3(f.lattice.spacing),
        float(params.lam),
        float(beta),
        _reach(f, beta, params.lam, mode),
        bool(self_cell),
        kernels.as3d(_region(f, region)),
    )
    return counts.reshape(f.lattice.shape)


def measure_field(f: GridFunction, params: LevelSetParams, mode: str = "accelerated",
                  self_cell: bool = False, region: Optional[np.ndarray] = None) -> GridFunction:
    """Cell measure times the level-set count at every node.

    Args:
        f: Bounded field
        params: q, s and lambda
        mode: "brute" scans the whole lattice, "accelerated" a bounded reach
        self_cell: Count the node's own cell when an axis neighbour qualifies
        region: Optional boolean domain for both points of a pair

    Returns:
        GridFunction: Measure of the x-slice of the level set
    """
    counts = level_set_counts(f, params, mode, self_cell, region)
    return GridFunction(f.lattice, counts * f.lattice.cell_measure)


def r_max(f: GridFunction, q: float, s: float, lam: float) -> float:
    """Largest distance at which a pair can still lie in the level set."""
    beta = f.lattice.dim / q + s
    return (2.0 * f.max_abs() / lam) ** (1.0 / beta)


def lambda_grid(f: GridFunction, q: float, s: float,
                points: int = DEFAULT_LAMBDA_POINTS,
                min_reach_cells: float = DEFAULT_MIN_REACH_CELLS,
                max_reach_fraction: float = DEFAULT_MAX_REACH_FRACTION) -> np.ndarray:
    """Geometric lambda grid inside the range the lattice resolves.

    The low end keeps (2 max|f| / lambda)^(1/beta) within a fraction of the
    window. The high end keeps the local level-set radius at least
    ``min_reach_cells`` cells: that radius is (L / lambda)^(1/(beta - 1)) with
    L = max |grad f| when beta > 1, and the global reach otherwise.

    Raises:
        ValueError: If the window is too small for the reach limits
    """
    if points < 2:
        raise ValueError(f"Lambda grid needs at least 2 points, got {points}")
    lattice = f.lattice
    beta = lattice.dim / q + s
    top = f.max_abs()
    if top == 0:
        return np.geomspace(1.0, 1e3, points)
    h = max(lattice.spacing)
    window = min(lattice.extent)
    lam_lo = 2.0 * top / (max_reach_fraction * window) ** beta
    if beta > 1:
        slope = float(gradient(f).magnitude.values.max()) if min(lattice.points) >= 3 else 0.0
        if slope == 0:
            slope = 2.0 * top / h
        lam_hi = slope / (min_reach_cells * h) ** (beta - 1.0)
    else:
        lam_hi = 2.0 * top / (min_reach_cells * h) ** beta
    if lam_lo >= lam_hi:
        raise ValueError(
            f"Window {window} is too small for reach limits [{min_reach_cells} cells, "
            f"{max_reach_fraction} window] at beta={beta:.4g}"
        )
    # Keep enough points in the top decade for limit extraction
    floor = lam_hi / 10.0 ** ((points - 1) / DEFAULT_MIN_DECADE_POINTS)
    if lam_lo < floor:
        logger.debug(f"Lambda grid low end raised from {lam_lo:.4g} to {floor:.4g}")
        lam_lo = floor
    return np.geomspace(lam_lo, lam_hi, points)


def limit_estimate(profile: LevelSetProfile,
                   min_points: int = DEFAULT_MIN_DECADE_POINTS) -> Tuple[float, float]:
    """Mean of the values over the top decade of the grid and their relative spread.

    Returns:
        Tuple[float, float]: (estimate, (max - min) / mean)

    Raises:
        ValueError: If the top decade holds fewer than ``min_points`` points
    """
    lam = profile.lambda_grid
    top = lam >= lam.max() / 10.0 * (1 - 1e-12)
    if np.count_nonzero(top) < min_points:
        raise ValueError(
            f"Top decade has {np.count_nonzero(top)} grid points, need {min_points}"
        )
    tail = profile.values[top]
    mean = float(tail.mean())
    if mean == 0:
        return 0.0, 0.0
    return mean, float((tail.max() - tail.min()) / mean)


def weak_functional(f: GridFunction, space: SpaceSpec, q: float, s: float,
                    lambdas: Optional[np.ndarray] = None, *,
                    mode: str = "accelerated",
                    self_cell_correction: bool = False,
                    points: int = DEFAULT_LAMBDA_POINTS,
                    min_reach_cells: float = DEFAULT_MIN_REACH_CELLS,
                    max_reach_fraction: float = DEFAULT_MAX_REACH_FRACTION,
                    spread_threshold: float = DEFAULT_SPREAD_THRESHOLD,
                    limit: bool = True,
                    region: Optional[np.ndarray] = None) -> LevelSetProfile:
    """lambda * || measure_field(f, lambda)^(1/q) ||_X along a lambda grid.

    Args:
        f: Bounded field
        space: The space X
        q: Level-set exponent
        s: Smoothness, with n/q + s the distance exponent
        lambdas: Explicit geometric grid; the clamped default grid otherwise
        mode: Pair scan mode
        self_cell_correction: Apply the self-cell count when n/q + s > 1
        spread_threshold: Largest top-decade spread for a reliable limit
        limit: Extract the large-lambda limit (off for supremum-only runs)
        region: Optional boolean domain; pairs leave the level set outside it

    Returns:
        LevelSetProfile: Values, supremum and limit estimate
    """
    n = f.lattice.dim
    beta = n / q + s
    if lambdas is None:
        grid = lambda_grid(f, q, s, points, min_reach_cells, max_reach_fraction)
    else:
        grid = np.sort(np.asarray(lambdas, dtype=np.float64))
        if grid.size < MIN_LAMBDA_POINTS:
            raise ValueError(f"Lambda grid needs at least {MIN_LAMBDA_POINTS} points, got {grid.size}")
    self_cell = self_cell_correction and beta > 1
    h = max(f.lattice.spacing)
    values = np.zeros(grid.size)
    reach_cells = np.zeros(grid.size)
    pair_counts = np.zeros(grid.size, dtype=np.int64)
    for index, lam in enumerate(grid):
        counts = level_set_counts(f, LevelSetParams(q, s, float(lam)), mode, self_cell, region)
        measure = GridFunction(f.lattice, (counts * f.lattice.cell_measure) ** (1.0 / q))
        values[index] = lam * norm(space, measure)
        reach_cells[index] = r_max(f, q, s, float(lam)) / h
        pair_counts[index] = int(counts.sum())
        logger.debug(f"lambda={lam:.6g}: value={values[index]:.6g}, pairs={pair_counts[index]}")

    profile = LevelSetProfile(grid, values, reach_cells, pair_counts)
    if not limit:
        return profile
    try:
        estimate, spread = limit_estimate(profile)
    except ValueError as e:
        logger.warning(f"No limit estimate: {e}")
        profile.reliable = False
        return profile
    profile.limit_diagnostic = spread
    if spread <= spread_threshold:
        profile.limit_estimate = estimate
    else:
        profile.reliable = False
        logger.warning(f"Top-decade spread {spread:.3g} exceeds {spread_threshold}; limit unreliable")
    return profile


def strong_functional(f: GridFunction, space: SpaceSpec, q: float, s: float) -> float:
    """|| (sum over y != x of |f(x)-f(y)|^q / |x-y|^(n+sq) cell)^(1/q) ||_X."""
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    n = f.lattice.dim
    sums = kernels.difference_quotient_sums(
        kernels.as3d(f.values),
        kernels.spacing3(f.lattice.spacing),
        float(q),
        float(n + s * q),
    )
    inner = (sums * f.lattice.cell_measure) ** (1.0 / q)
    return norm(space, GridFunction(f.lattice, inner.reshape(f.lattice.shape)))


def gagliardo_seminorm(f: GridFunction, p: float, s: float) -> float:
    """The W^{s,p} Gagliardo seminorm (double integral form)."""
    return strong_functional(f, Lebesgue(p), p, s)


# Sphere constant

def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return float(2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0))


def _sphere_closed_form(q: float, n: int) -> float:
    return float(2.0 * np.pi ** ((n - 1) / 2.0) * gamma((q + 1) / 2.0) / gamma((n + q) / 2.0))


def _half_period_power(a: float) -> float:
    """Integral over [0, pi/2] of sin(u)^a, by Gauss-Jacobi with weight u^a."""
    x, w = roots_jacobi(_JACOBI_NODES, 0.0, a)
    u = 0.25 * np.pi * (1.0 + x)
    return float((0.25 * np.pi) ** (a + 1.0) * np.sum(w * (np.sin(u) / u) ** a))


def _sphere_quadrature(q: float, n: int) -> float:
    """Angular quadrature with e on the first axis.

    The circle integral of |cos theta|^q is split at its zeros into four
    copies of the half-period integral. In R^3 the polar factor adds one
    more power of sin phi.
    """
    if n == 1:
        return 2.0
    azimuth = 4.0 * _half_period_power(q)
    if n == 2:
        return azimuth
    return azimuth * 2.0 * _half_period_power(q + 1.0)


def _circle_trapezoid(q: float) -> float:
    """Periodic trapezoid rule for the integral of |cos theta|^q over [0, 2 pi)."""
    theta = np.arange(_TRAPEZOID_NODES) * (2.0 * np.pi / _TRAPEZOID_NODES)
    return float(2.0 * np.pi / _TRAPEZOID_NODES * np.sum(np.abs(np.cos(theta)) ** q))


@lru_cache(maxsize=128)
def sphere_constant(q: float, n: int, method: str = "quadrature") -> SphereConstant:
    """K(q,n) by closed form and by angular quadrature; both are kept.

    In R^2 the periodic trapezoid value over 4096 angles is recorded too.

    Raises:
        ValueError: If q <= 0, n outside 1..3 or the method is unknown
        RuntimeError: If the two evaluations disagree beyond 1e-8
    """
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    if n not in (1, 2, 3):
        raise ValueError(f"Dimension must be 1, 2 or 3, got {n}")
    if method not in ("closed-form", "quadrature"):
        raise ValueError(f"Unknown method '{method}'")
    closed = _sphere_closed_form(q, n)
    quad = _sphere_quadrature(q, n)
    if abs(closed - quad) > SPHERE_TOLERANCE * max(1.0, abs(quad)):
        raise RuntimeError(f"K({q},{n}) closed form {closed!r} disagrees with quadrature {quad!r}")
    value = closed if method == "closed-form" else quad
    trapezoid = _circle_trapezoid(q) if n == 2 else None
    return SphereConstant(q, n, value, method, closed, quad, trapezoid)


# Reference values

def gradient_norm(f: GridFunction, space: SpaceSpec, analytic: bool = True) -> float:
    """|| |grad f| ||_X, from the analytic gradient when f carries its spec."""
    if analytic and f.provenance is not None:
        magnitude = sample_gradient(f.provenance, f.lattice).magnitude
    else:
        magnitude = gradient(f).magnitude
    return norm(space, magnitude)


def limit_reference(f: GridFunction, space: SpaceSpec, q: float, analytic: bool = True) -> float:
    """(K(q,n)/n)^(1/q) || |grad f| ||_X, the large-lambda limit of the weak functional at s = 1."""
    n = f.lattice.dim
    k = sphere_constant(float(q), n).value
    return (k / n) ** (1.0 / q) * gradient_norm(f, space, analytic)
