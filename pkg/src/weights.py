"""Muckenhoupt weights: catalog, sampling and A_p constant estimation."""
import logging
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .field import GridFunction, Lattice

logger = logging.getLogger(__name__)

WEIGHT_FAMILIES = ("constant", "power", "step", "product")

DEFAULT_CORNER_STRIDE = 4
DEFAULT_MIN_SIDE_CELLS = 4


@dataclass(frozen=True)
class WeightSpec:
    """Catalogued analytic weight.

    power:   |x - center|^a
    step:    v_minus where x_0 < center_0, v_plus elsewhere
    product: one-dimensional factor weights applied axis by axis
    """

    family: str
    a: float = 0.0
    center: Tuple[float, ...] = (0.0,)
    value: float = 1.0
    v_minus: float = 1.0
    v_plus: float = 1.0
    factors: Tuple["WeightSpec", ...] = dc_field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in WEIGHT_FAMILIES:
            raise ValueError(f"Unknown weight family '{self.family}'")
        if self.family == "constant" and self.value <= 0:
            raise ValueError(f"Constant weight must be positive, got {self.value}")
        if self.family == "step" and (self.v_minus <= 0 or self.v_plus <= 0):
            raise ValueError("Step weight values must be positive")
        if self.family == "product" and not self.factors:
            raise ValueError("Product weight needs per-axis factors")

    def power(self, e: float) -> "WeightSpec":
        """The weight raised to the power e."""
        if self.family == "constant":
            return WeightSpec("constant", value=self.value ** e)
        if self.family == "power":
            return WeightSpec("power", a=self.a * e, center=self.center)
        if self.family == "step":
            return WeightSpec("step", center=self.center,
                              v_minus=self.v_minus ** e, v_plus=self.v_plus ** e)
        return WeightSpec("product", factors=tuple(f.power(e) for f in self.factors))

    def to_dict(self) -> Dict:
        if self.family == "constant":
            return {"family": "constant", "value": self.value}
        if self.family == "power":
            return {"family": "power", "a": self.a, "center": list(self.center)}
        if self.family == "step":
            return {"family": "step", "center": list(self.center),
                    "v_minus": self.v_minus, "v_plus": self.v_plus}
        return {"family": "product", "factors": [f.to_dict() for f in self.factors]}

    @classmethod
    def from_dict(cls, data: Dict) -> "WeightSpec":
        center = data.get("center", [0.0])
        if np.isscalar(center):
            center = [center]
        try:
            return cls(
                family=data["family"],
                a=float(data.get("a", 0.0)),
                center=tuple(float(c) for c in center),
                value=float(data.get("value", 1.0)),
                v_minus=float(data.get("v_minus", 1.0)),
                v_plus=float(data.get("v_plus", 1.0)),
                factors=tuple(cls.from_dict(f) for f in data.get("factors", [])),
            )
        except KeyError as e:
            raise ValueError(f"Weight spec is missing field {e}")


def _evaluate(spec: WeightSpec, x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    center = np.asarray(spec.center, dtype=np.float64)
    if center.size == 1 and n > 1:
        center = np.full(n, center[0])
    if spec.family == "constant":
        return np.full(x.shape[:-1], spec.value)
    if spec.family == "power":
        dist = np.sqrt(np.sum((x - center) ** 2, axis=-1))
        with np.errstate(divide="ignore"):
            return dist ** spec.a
    if spec.family == "step":
        return np.where(x[..., 0] < center[0], spec.v_minus, spec.v_plus)
    if len(spec.factors) != n:
        raise ValueError(f"Product weight needs {n} factors, got {len(spec.factors)}")
    out = np.ones(x.shape[:-1])
    for i, factor in enumerate(spec.factors):
        out = out * _evaluate(factor, x[..., i:i + 1])
    return out


def sample_weight(spec: WeightSpec, lattice: Lattice) -> GridFunction:
    """Cell-centered sampling: each node carries the weight half a cell up every axis.

    Raises:
        ValueError: If the weight is not finite and positive at every sample point
    """
    values = _evaluate(spec, lattice.coordinates(offset=0.5))
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError(f"Weight {spec.to_dict()} is not finite and positive on the lattice")
    return GridFunction(lattice, values)


def is_a1_admissible(spec: WeightSpec, dim: int = 1) -> Tuple[bool, str]:
    """Catalog lookup of A_1 membership on R^dim with a short rationale."""
    if spec.family == "constant":
        return True, "constant weights are A_1 with constant 1"
    if spec.family == "step":
        return True, "bounded above and below by positive constants"
    if spec.family == "power":
        ok = -dim < spec.a <= 0
        return ok, f"|x|^a is A_1 on R^{dim} iff -{dim} < a <= 0 (a={spec.a})"
    if spec.family == "product":
        verdicts = [is_a1_admissible(f, 1) for f in spec.factors]
        ok = all(v for v, _ in verdicts)
        return ok, "; ".join(reason for _, reason in verdicts)
    raise ValueError(f"Unknown weight family '{spec.family}'")


@dataclass
class ApEstimate:
    """Discrete lower estimate of [w]_{A_p} with the cube attaining it."""

    p: float
    value: float
    attaining_cube: Tuple[Tuple[float, ...], Tuple[float, ...]]
    cube_family_size: int


@dataclass(frozen=True)
class CubeFamily:
    """Index-space cubes: corners every ``corner_stride`` nodes, dyadic sides in cells."""

    corner_stride: int = DEFAULT_CORNER_STRIDE
    min_side_cells: int = DEFAULT_MIN_SIDE_CELLS

    def sides(self, shape: Tuple[int, ...]) -> List[int]:
        limit = min(shape) - 1
        sides = []
        side = self.min_side_cells
        while side <= limit:
            sides.append(side)
            side *= 2
        return sides

    def corners(self, n: int, side: int) -> np.ndarray:
        return np.arange(0, n - side, self.corner_stride)

    def size(self, shape: Tuple[int, ...]) -> int:
        total = 0
        for side in self.sides(shape):
            total += int(np.prod([self.corners(n, side).size for n in shape]))
        return total


def _box_sums(prefix: np.ndarray, corners: List[np.ndarray], side: int) -> np.ndarray:
    """Sums over inclusive index boxes [c, c + side] via a zero-padded prefix table."""
    dim = len(corners)
    total = 0.0
    for bits in np.ndindex(*(2,) * dim):
        index = [c + side + 1 if b else c for c, b in zip(corners, bits)]
        sign = (-1) ** (dim - sum(bits))
        total = total + sign * prefix[np.ix_(*index)]
    return total


def _prefix(values: np.ndarray) -> np.ndarray:
    table = np.pad(values, [(1, 0)] * values.ndim)
    for axis in range(values.ndim):
        table = np.cumsum(table, axis=axis)
    return table


def _window_min(values: np.ndarray, side: int) -> np.ndarray:
    """Entry at index c holds the min over the inclusive box [c - L//2, ...] of length side+1."""
    out = values
    for axis in range(values.ndim):
        out = ndimage.minimum_filter1d(out, size=side + 1, axis=axis, mode="nearest")
    return out


def ap_constant(w: GridFunction, p: float, cube_family: Optional[CubeFamily] = None) -> ApEstimate:
    """Estimate [w]_{A_p} as a supremum over a finite cube family.

    Averages are node means over each cube; for p = 1 the essential
    supremum of 1/w is the maximum over the cube's nodes.

    Args:
        w: Positive weight field
        p: Exponent, at least 1
        cube_family: Cube family (corner stride and minimal side)

    Returns:
        ApEstimate: Largest average product over the family

    Raises:
        ValueError: On non-positive weights, p < 1 or an empty family
    """
    if p < 1:
        raise ValueError(f"A_p needs p >= 1, got {p}")
    values = w.values
    if np.any(values <= 0):
        raise ValueError("Weight must be strictly positive on every node")
    family = cube_family or CubeFamily()
    shape = w.lattice.shape
    sides = family.sides(shape)
    if not sides:
        raise ValueError(f"Cube family is empty for lattice shape {shape}")

    prefix_w = _prefix(values)
    prefix_dual = None if p == 1 else _prefix(values ** (1.0 / (1.0 - p)))

    best = -np.inf
    best_cube = None
    for side in sides:
        corners = [family.corners(n, side) for n in shape]
        if any(c.size == 0 for c in corners):
            continue
        count = float((side + 1) ** w.lattice.dim)
        avg_w = _box_sums(prefix_w, corners, side) / count
        if p == 1:
            mins = _window_min(values, side)
            offset = (side + 1) // 2
            dual = 1.0 / mins[np.ix_(*[c + offset for c in corners])]
        else:
            dual = (_box_sums(prefix_dual, corners, side) / count) ** (p - 1.0)
        products = avg_w * dual
        flat = int(np.argmax(products))
        if products.flat[flat] > best:
            best = float(products.flat[flat])
            index = np.unravel_index(flat, products.shape)
            start = [int(c[i]) for c, i in zip(corners, index)]
            best_cube = (start, side)

    if best_cube is None:
        raise ValueError(f"Cube family is empty for lattice shape {shape}")
    start, side = best_cube
    axes = w.lattice.axes()
    lower = tuple(float(a[s]) for a, s in zip(axes, start))
    upper = tuple(float(a[s + side]) for a, s in zip(axes, start))
    logger.debug(f"A_{p} estimate {best:.6g} attained on cube {lower}..{upper}")
    return ApEstimate(p, best, (lower, upper), family.size(shape))


def a1_constant(w: GridFunction, cube_family: Optional[CubeFamily] = None) -> float:
    """Shorthand for the A_1 estimate value."""
    return ap_constant(w, 1.0, cube_family).value
