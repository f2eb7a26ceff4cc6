"""Lattices, sampled scalar fields and discrete calculus.

This module holds the discretization every other module works on: uniform
rectangular lattices in one to three dimensions, real fields sampled on them,
trapezoid quadrature, second-order gradients, lattice mollification and a
catalog of analytic test functions with exact gradients.
"""
import csv
import logging
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.special import roots_legendre

logger = logging.getLogger(__name__)

FAMILIES = (
    "hat",
    "smooth-bump",
    "smoothed-hat",
    "gaussian-like",
    "linear",
    "constant",
    "tensor-product",
    "sum",
)

# Families whose profile depends only on |x - center| / radius
RADIAL_FAMILIES = ("hat", "smooth-bump", "smoothed-hat", "gaussian-like")


def _as_tuple(value, dim: int, cast=float) -> tuple:
    """Broadcast a scalar or sequence to a per-axis tuple."""
    if np.isscalar(value):
        return tuple(cast(value) for _ in range(dim))
    values = tuple(cast(v) for v in value)
    if len(values) != dim:
        raise ValueError(f"Expected {dim} per-axis values, got {len(values)}")
    return values


@dataclass(frozen=True)
class Lattice:
    """Uniform rectangular lattice with nodes lo + i * spacing."""

    dim: int
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    points: Tuple[int, ...]

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((h - l) / (n - 1) for l, h, n in zip(self.lo, self.hi, self.points))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def extent(self) -> Tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def axes(self) -> List[np.ndarray]:
        """Per-axis node coordinates."""
        return [l + np.arange(n) * h for l, n, h in zip(self.lo, self.points, self.spacing)]

    def coordinates(self, offset: float = 0.0) -> np.ndarray:
        """Node coordinates as an array of shape (*shape, dim).

        Args:
            offset: Fraction of a cell added on every axis (0.5 gives cell centers)
        """
        axes = [a + offset * h for a, h in zip(self.axes(), self.spacing)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def index_of(self, point: Sequence[float]) -> Tuple[int, ...]:
        """Nearest node index of a point, clipped to the lattice."""
        point = _as_tuple(point, self.dim)
        return tuple(
            int(np.clip(round((x - l) / h), 0, n - 1))
            for x, l, h, n in zip(point, self.lo, self.spacing, self.points)
        )

    def refined(self) -> "Lattice":
        """Same window with the spacing halved on every axis."""
        return Lattice(self.dim, self.lo, self.hi, tuple(2 * n - 1 for n in self.points))

    def to_dict(self) -> Dict:
        return {"dim": self.dim, "lo": list(self.lo), "hi": list(self.hi), "points": list(self.points)}


def make_lattice(dim: int, lo, hi, points) -> Lattice:
    """Build a validated lattice.

    Args:
        dim: Dimension, one of 1, 2, 3
        lo: Lower bound (scalar or per axis)
        hi: Upper bound (scalar or per axis)
        points: Node count (scalar or per axis), at least 2

    Returns:
        Lattice: The lattice

    Raises:
        ValueError: If any argument is outside its range
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"Lattice dimension must be 1, 2 or 3, got {dim}")
    lo_t = _as_tuple(lo, dim)
    hi_t = _as_tuple(hi, dim)
    points_t = _as_tuple(points, dim, cast=int)
    for axis, (l, h, n) in enumerate(zip(lo_t, hi_t, points_t)):
        if n < 2:
            raise ValueError(f"Axis {axis} needs at least 2 points, got {n}")
        if not l < h:
            raise ValueError(f"Axis {axis} requires lo < hi, got lo={l}, hi={h}")
    return Lattice(dim, lo_t, hi_t, points_t)


@dataclass(frozen=True)
class FunctionSpec:
    """Analytic test function descriptor.

    Radial families use ``center`` and ``radius``; ``k`` is the smoothing
    parameter of the smoothed hat; ``linear`` uses ``slope`` along ``axis``;
    ``tensor-product`` applies one-dimensional ``factors`` axis by axis and
    ``sum`` adds full-dimensional ``factors``.
    """

    family: str
    center: Tuple[float, ...] = (0.0,)
    radius: float = 1.0
    height: float = 1.0
    slope: float = 1.0
    axis: int = 0
    k: int = 16
    factors: Tuple["FunctionSpec", ...] = dc_field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"Unknown function family '{self.family}'")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.family == "smoothed-hat" and self.k < 1:
            raise ValueError(f"smoothing parameter k must be positive, got {self.k}")
        if self.family in ("tensor-product", "sum") and not self.factors:
            raise ValueError(f"Family '{self.family}' needs at least one factor")

    def scaled(self, factor: float) -> "FunctionSpec":
        """Spec of x -> f(x / factor)."""
        return FunctionSpec(
            family=self.family,
            center=tuple(c * factor for c in self.center),
            radius=self.radius * factor,
            height=self.height,
            slope=self.slope / factor,
            axis=self.axis,
            k=self.k,
            factors=tuple(f.scaled(factor) for f in self.factors),
        )

    def to_dict(self) -> Dict:
        data = {"family": self.family, "center": list(self.center), "radius": self.radius,
                "height": self.height}
        if self.family == "linear":
            data.update({"slope": self.slope, "axis": self.axis})
        if self.family == "smoothed-hat":
            data["k"] = self.k
        if self.factors:
            data["factors"] = [f.to_dict() for f in self.factors]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "FunctionSpec":
        try:
            center = data.get("center", [0.0])
            if np.isscalar(center):
                center = [center]
            return cls(
                family=data["family"],
                center=tuple(float(c) for c in center),
                radius=float(data.get("radius", 1.0)),
                height=float(data.get("height", 1.0)),
                slope=float(data.get("slope", 1.0)),
                axis=int(data.get("axis", 0)),
                k=int(data.get("k", 16)),
                factors=tuple(cls.from_dict(f) for f in data.get("factors", [])),
            )
        except KeyError as e:
            raise ValueError(f"Function spec is missing field {e}")


@dataclass
class GridFunction:
    """Real scalar field sampled on a lattice."""

    lattice: Lattice
    values: np.ndarray
    provenance: Optional[FunctionSpec] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != self.lattice.size:
            raise ValueError(
                f"Field has {values.size} values but lattice has {self.lattice.size} nodes"
            )
        values = values.reshape(self.lattice.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        self.values = values

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.lattice, values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.lattice, np.abs(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write one row per node: coordinates then value."""
        coords = self.lattice.coordinates().reshape(-1, self.lattice.dim)
        names = ["x", "y", "z"][: self.lattice.dim]
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(names + ["value"])
            for point, value in zip(coords, self.values.ravel()):
                writer.writerow([repr(float(c)) for c in point] + [repr(float(value))])


@dataclass
class Gradient:
    """Per-axis derivative fields plus the Euclidean magnitude."""

    components: List[GridFunction]
    magnitude: GridFunction


def _check_same_lattice(a: GridFunction, b: GridFunction) -> None:
    if a.lattice != b.lattice:
        raise ValueError("Fields live on different lattices")


@lru_cache(maxsize=64)
def _trapezoid_weights(lattice: Lattice) -> np.ndarray:
    weights = np.ones(lattice.shape)
    for axis, (n, h) in enumerate(zip(lattice.points, lattice.spacing)):
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        shape = [1] * lattice.dim
        shape[axis] = n
        weights = weights * w.reshape(shape)
    weights.setflags(write=False)
    return weights


def quadrature_weights(lattice: Lattice) -> np.ndarray:
    """Trapezoid node weights (halved boundary cells on every axis)."""
    return _trapezoid_weights(lattice)


def integrate(f: GridFunction, weight: Optional[GridFunction] = None,
              mask: Optional[np.ndarray] = None) -> float:
    """Trapezoid realization of the integral of f (times an optional weight).

    Args:
        f: Integrand
        weight: Optional non-negative weight on the same lattice
        mask: Optional boolean array restricting the integral to a region

    Returns:
        float: The integral

    Raises:
        ValueError: On lattice mismatch or a negative weight
    """
    terms = f.values * quadrature_weights(f.lattice)
    if weight is not None:
        _check_same_lattice(f, weight)
        if np.any(weight.values < 0):
            raise ValueError("Weight must be non-negative")
        terms = terms * weight.values
    if mask is not None:
        terms = np.where(mask, terms, 0.0)
    return float(np.sum(terms))


def gradient(f: GridFunction) -> Gradient:
    """Central differences inside, one-sided second order at the boundary."""
    if min(f.lattice.points) < 3:
        raise ValueError("Gradient needs at least 3 points per axis")
    parts = np.gradient(f.values, *f.lattice.spacing, edge_order=2)
    if f.lattice.dim == 1:
        parts = [parts]
    components = [GridFunction(f.lattice, p) for p in parts]
    magnitude = np.sqrt(sum(p * p for p in parts))
    return Gradient(components, GridFunction(f.lattice, magnitude))


def _bump(r2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-|x|^2)) inside the unit ball, zero outside."""
    out = np.zeros_like(r2, dtype=np.float64)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def mollifier_kernel(lattice: Lattice, k: int) -> np.ndarray:
    """Lattice kernel of eta_k = k^n eta(k x) with unit discrete mass."""
    if k < 1:
        raise ValueError(f"Mollifier index must be a positive integer, got {k}")
    h = lattice.spacing
    if any(1.0 / k < 2 * hi for hi in h):
        raise ValueError(
            f"Mollifier radius 1/{k} is below two lattice spacings {h}; kernel unresolvable"
        )
    half = [int(np.floor((1.0 / k) / hi)) for hi in h]
    offsets = np.meshgrid(*[np.arange(-m, m + 1) * hi for m, hi in zip(half, h)], indexing="ij")
    r2 = sum((k * o) ** 2 for o in offsets)
    kernel = _bump(r2)
    return kernel / kernel.sum()


def mollify(f: GridFunction, k: int) -> GridFunction:
    """Discrete convolution of f with the renormalized mollifier eta_k."""
    kernel = mollifier_kernel(f.lattice, k)
    values = ndimage.convolve(f.values, kernel, mode="nearest")
    logger.debug(f"Mollified field with k={k}, kernel shape {kernel.shape}")
    return GridFunction(f.lattice, values)


# Analytic families

_GAUSS_NODES = 96


@lru_cache(maxsize=1)
def _legendre_rule() -> Tuple[np.ndarray, np.ndarray]:
    return roots_legendre(_GAUSS_NODES)


def _bump_moments(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Integrals of eta(s) and s*eta(s) over [-1, t] for the 1-D bump eta."""
    t = np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)
    x, w = _legendre_rule()
    half = 0.5 * (t + 1.0)
    s = -1.0 + half[..., None] * (x + 1.0)
    eta = _bump(s * s)
    c0 = half * np.sum(w * eta, axis=-1)
    c1 = half * np.sum(w * s * eta, axis=-1)
    return c0, c1


def _smoothed_tent(rho: np.ndarray, r: float, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tent of halfwidth r mollified by eta_k, and its derivative."""
    z, _ = _bump_moments(np.array(1.0))

    def piece(a, b):
        c0a, c1a = _bump_moments(a)
        c0b, c1b = _bump_moments(b)
        return c0b - c0a, c1b - c1a

    # Rising side of the tent, then falling side
    d0_left, d1_left = piece(k * rho, k * (rho + r))
    d0_right, d1_right = piece(k * (rho - r), k * rho)
    value = ((1 + rho / r) * d0_left - d1_left / (k * r)
             + (1 - rho / r) * d0_right + d1_right / (k * r)) / z
    derivative = (d0_left - d0_right) / (r * z)
    return value, derivative


def _center(spec: FunctionSpec, n: int) -> np.ndarray:
    """Spec center as an n-vector; a single coordinate is broadcast."""
    if len(spec.center) == n:
        return np.asarray(spec.center, dtype=np.float64)
    if len(spec.center) == 1:
        return np.full(n, spec.center[0], dtype=np.float64)
    raise ValueError(f"Center {spec.center} does not match dimension {n}")


def _radial(spec: FunctionSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    center = _center(spec, x.shape[-1])
    diff = x - center
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[..., None] > 0, diff / dist[..., None], 0.0)
    rho = dist / spec.radius
    if spec.family == "hat":
        value = np.maximum(0.0, 1.0 - rho)
        dprofile = np.where(rho < 1.0, -1.0 / spec.radius, 0.0)
    elif spec.family == "smooth-bump":
        inside = rho < 1.0
        q = np.where(inside, 1.0 - rho * rho, 1.0)
        value = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
        dprofile = np.where(inside, value * (-2.0 * rho / (q * q)) / spec.radius, 0.0)
    elif spec.family == "gaussian-like":
        value = np.exp(-rho * rho)
        dprofile = -2.0 * rho * value / spec.radius
    else:
        value, dprofile = _smoothed_tent(dist, spec.radius, spec.k)
    return spec.height * value, spec.height * dprofile[..., None] * unit


def evaluate(spec: FunctionSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values and gradients of an analytic spec at points x of shape (..., n)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if spec.family in RADIAL_FAMILIES:
        return _radial(spec, x)
    if spec.family == "constant":
        return np.full(x.shape[:-1], spec.height), np.zeros(x.shape)
    if spec.family == "linear":
        if spec.axis >= n:
            raise ValueError(f"Linear axis {spec.axis} outside dimension {n}")
        c = _center(spec, n)[spec.axis]
        value = spec.slope * (x[..., spec.axis] - c)
        grad = np.zeros(x.shape)
        grad[..., spec.axis] = spec.slope
        return value, grad
    if spec.family == "sum":
        value = np.zeros(x.shape[:-1])
        grad = np.zeros(x.shape)
        for factor in spec.factors:
            v, g = evaluate(factor, x)
            value += v
            grad += g
        return value, grad
    # tensor-product: factor i acts on coordinate i
    if len(spec.factors) != n:
        raise ValueError(f"Tensor product needs {n} factors, got {len(spec.factors)}")
    parts = [evaluate(factor, x[..., i:i + 1]) for i, factor in enumerate(spec.factors)]
    values = [v for v, _ in parts]
    value = spec.height * np.prod(values, axis=0)
    grad = np.zeros(x.shape)
    for i, (_, g) in enumerate(parts):
        others = np.prod([v for j, v in enumerate(values) if j != i], axis=0) if n > 1 else 1.0
        grad[..., i] = spec.height * g[..., 0] * others
    return value, grad


def sample(spec: FunctionSpec, lattice: Lattice) -> GridFunction:
    """Evaluate an analytic spec at every lattice node."""
    values, _ = evaluate(spec, lattice.coordinates())
    return GridFunction(lattice, values, provenance=spec)


def sample_gradient(spec: FunctionSpec, lattice: Lattice) -> Gradient:
    """Analytic gradient of a spec sampled at the lattice nodes."""
    _, grad = evaluate(spec, lattice.coordinates())
    components = [GridFunction(lattice, grad[..., i]) for i in range(lattice.dim)]
    magnitude = GridFunction(lattice, np.sqrt(np.sum(grad * grad, axis=-1)))
    return Gradient(components, magnitude)


def smooth_catalog(dim: int) -> List[FunctionSpec]:
    """Ten or more smooth test functions with compactly supported gradients."""
    origin = (0.0,) * dim
    shifted = tuple(0.25 if i == 0 else -0.1 for i in range(dim))
    specs = [
        FunctionSpec("smooth-bump", center=origin, radius=1.0),
        FunctionSpec("smooth-bump", center=shifted, radius=0.75, height=2.0),
        FunctionSpec("smooth-bump", center=origin, radius=0.5, height=0.5),
        FunctionSpec("smoothed-hat", center=origin, radius=1.0, k=8),
        FunctionSpec("smoothed-hat", center=shifted, radius=0.75, k=8, height=1.5),
        FunctionSpec("smooth-bump", center=tuple(-c for c in shifted), radius=1.25, height=-1.0),
        FunctionSpec("sum", center=origin, factors=(
            FunctionSpec("smooth-bump", center=shifted, radius=0.6),
            FunctionSpec("smooth-bump", center=tuple(-c for c in shifted), radius=0.6, height=-1.0),
        )),
        FunctionSpec("sum", center=origin, factors=(
            FunctionSpec("smooth-bump", center=origin, radius=1.0),
            FunctionSpec("smooth-bump", center=origin, radius=0.4, height=0.5),
        )),
        FunctionSpec("tensor-product", center=origin, factors=tuple(
            FunctionSpec("smooth-bump", center=(0.0,), radius=1.0) for _ in range(dim)
        )),
        FunctionSpec("tensor-product", center=origin, height=3.0, factors=tuple(
            FunctionSpec("smooth-bump", center=(0.1 * (i + 1),), radius=0.8) for i in range(dim)
        )),
    ]
    return specs


CATALOG_NAMES = {
    "hat": FunctionSpec("hat"),
    "smooth-bump": FunctionSpec("smooth-bump"),
    "smoothed-hat": FunctionSpec("smoothed-hat"),
    "gaussian-like": FunctionSpec("gaussian-like"),
    "linear": FunctionSpec("linear"),
    "constant": FunctionSpec("constant"),
}


def catalog_spec(name: str, dim: int) -> FunctionSpec:
    """Named catalog entry centered at the origin of R^dim."""
    if name not in CATALOG_NAMES:
        raise ValueError(f"Unknown catalog function '{name}'; known: {sorted(CATALOG_NAMES)}")
    base = CATALOG_NAMES[name]
    return FunctionSpec(base.family, center=(0.0,) * dim, radius=base.radius,
                        height=base.height, slope=base.slope, k=base.k)
