"""Ball Banach function space norms.

Seven families are supported: Lebesgue, weighted Lebesgue, Morrey,
mixed-norm Lebesgue, variable-exponent Lebesgue, Orlicz and Orlicz-slice.
All integrals use the trapezoid node weights of the lattice. Morrey norms
are suprema over a finite ball family and are therefore lower bounds.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma

from . import kernels
from .field import GridFunction, Lattice, integrate, quadrature_weights
from .weights import WeightSpec, sample_weight

logger = logging.getLogger(__name__)

LUXEMBURG_REL_TOL = 1e-10
LUXEMBURG_MAX_ITER = 200

ORLICZ_FAMILIES = ("power", "power_log")
EXPONENT_FAMILIES = ("constant", "smoothed_step")

DEFAULT_MORREY_STRIDE = 4
DEFAULT_MORREY_STEPS = 16
DEFAULT_MORREY_LINEAR_CELLS = 16


def conjugate(p: float) -> float:
    """Hölder conjugate exponent, with 1 and infinity paired."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class OrliczSpec:
    """Orlicz function: t^p or t^p log(e + t), p >= 1."""

    family: str
    p: float

    def __post_init__(self):
        if self.family not in ORLICZ_FAMILIES:
            raise ValueError(f"Unknown Orlicz family '{self.family}'")
        if not 1 <= self.p < math.inf:
            raise ValueError(f"Orlicz exponent must be in [1, inf), got {self.p}")

    @property
    def code(self) -> int:
        return ORLICZ_FAMILIES.index(self.family)

    def phi(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.family == "power":
            return t ** self.p
        return t ** self.p * np.log(np.e + t)

    def to_dict(self) -> Dict:
        return {"family": self.family, "p": self.p}

    @classmethod
    def from_dict(cls, data: Dict) -> "OrliczSpec":
        return cls(data.get("family", "power"), float(data["p"]))


@dataclass(frozen=True)
class ExponentSpec:
    """Smooth variable exponent profile along one axis.

    constant:      r(x) = r_minus
    smoothed_step: r_minus + (r_plus - r_minus) (1 + tanh((x_axis - center) / width)) / 2
    """

    family: str
    r_minus: float
    r_plus: Optional[float] = None
    center: float = 0.0
    width: float = 0.25
    axis: int = 0

    def __post_init__(self):
        if self.family not in EXPONENT_FAMILIES:
            raise ValueError(f"Unknown exponent family '{self.family}'")
        r_plus = self.r_minus if self.r_plus is None else self.r_plus
        object.__setattr__(self, "r_plus", float(r_plus))
        if not 1 <= self.r_minus <= self.r_plus < math.inf:
            raise ValueError(
                f"Exponent bounds must satisfy 1 <= r_minus <= r_plus < inf, "
                f"got {self.r_minus}, {self.r_plus}"
            )
        if self.width <= 0:
            raise ValueError(f"Step width must be positive, got {self.width}")
        if not 0 <= self.axis < 3:
            raise ValueError(f"Exponent axis must be 0, 1 or 2, got {self.axis}")

    def scaled(self, s: float) -> "ExponentSpec":
        return ExponentSpec(self.family, self.r_minus * s, self.r_plus * s, self.center, self.width, self.axis)

    def sample(self, lattice: Lattice) -> GridFunction:
        if self.family == "constant":
            return GridFunction(lattice, np.full(lattice.shape, self.r_minus))
        if self.axis >= lattice.dim:
            raise ValueError(f"Exponent axis {self.axis} does not exist on a {lattice.dim}-D lattice")
        xa = lattice.coordinates()[..., self.axis]
        ramp = 0.5 * (1.0 + np.tanh((xa - self.center) / self.width))
        values = np.clip(self.r_minus + (self.r_plus - self.r_minus) * ramp, self.r_minus, self.r_plus)
        return GridFunction(lattice, values)

    def to_dict(self) -> Dict:
        return {"family": self.family, "r_minus": self.r_minus, "r_plus": self.r_plus,
                "center": self.center, "width": self.width, "axis": self.axis}

    @classmethod
    def from_dict(cls, data: Dict) -> "ExponentSpec":
        return cls(
            data.get("family", "constant"),
            float(data["r_minus"]),
            data.get("r_plus"),
            float(data.get("center", 0.0)),
            float(data.get("width", 0.25)),
            int(data.get("axis", 0)),
        )


class SpaceSpec:
    """Base of the space variants; ``kind`` is the JSON tag."""

    kind = ""

    def to_dict(self) -> Dict:
        raise NotImplementedError

    def label(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "space")
        return f"{self.kind}({params})"


@dataclass(frozen=True)
class Lebesgue(SpaceSpec):
    p: float
    kind = "lebesgue"

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"Lebesgue exponent must be >= 1, got {self.p}")

    def to_dict(self) -> Dict:
        return {"space": self.kind, "p": self.p}


@dataclass(frozen=True)
class WeightedLebesgue(SpaceSpec):
    p: float
    w: WeightSpec
    kind = "weighted_lebesgue"

    def __post_init__(self):
        if not 1 <= self.p < math.inf:
            raise ValueError(f"Weighted Lebesgue exponent must be in [1, inf), got {self.p}")

    def to_dict(self) -> Dict:
        return {"space": self.kind, "p": self.p, "weight": self.w.to_dict()}


@dataclass(frozen=True)
class Morrey(SpaceSpec):
    """M^alpha_r: sup over balls of |B|^(1/alpha - 1/r) ||f||_{L^r(B)}."""

    r: float
    alpha: float
    center_stride: int = DEFAULT_MORREY_STRIDE
    steps_per_octave: int = DEFAULT_MORREY_STEPS
    kind = "morrey"

    def __post_init__(self):
        if not 1 <= self.r <= self.alpha < math.inf:
            raise ValueError(f"Morrey needs 1 <= r <= alpha < inf, got r={self.r}, alpha={self.alpha}")
        if self.center_stride < 1 or self.steps_per_octave < 1:
            raise ValueError("Morrey ball family needs positive stride and steps")

    def to_dict(self) -> Dict:
        return {"space": self.kind, "r": self.r, "alpha": self.alpha}


@dataclass(frozen=True)
class MixedNorm(SpaceSpec):
    """Iterated Lebesgue norm, axis 0 innermost."""

    r_vec: Tuple[float, ...]
    kind = "mixed"

    def __post_init__(self):
        object.__setattr__(self, "r_vec", tuple(float(r) for r in self.r_vec))
        if not self.r_vec or any(r < 1 for r in self.r_vec):
            raise ValueError(f"Mixed-norm exponents must all be >= 1, got {self.r_vec}")

    def to_dict(self) -> Dict:
        return {"space": self.kind, "r": list(self.r_vec)}


@dataclass(frozen=True)
class VariableLebesgue(SpaceSpec):
    exponent: ExponentSpec
    kind = "variable"

    def to_dict(self) -> Dict:
        return {"space": self.kind, "exponent": self.exponent.to_dict()}


@dataclass(frozen=True)
class Orlicz(SpaceSpec):
    phi: OrliczSpec
    kind = "orlicz"

    def to_dict(self) -> Dict:
        return {"space": self.kind, "phi": self.phi.to_dict()}


@dataclass(frozen=True)
class OrliczSlice(SpaceSpec):
    """(E_Phi^r)_t: L^r norm of the local ratio ||f 1_B(x,t)||_Phi / ||1_B(x,t)||_Phi."""

    phi: OrliczSpec
    r: float
    t: float
    kind = "orlicz_slice"

    def __post_init__(self):
        if not 1 <= self.r < math.inf:
            raise ValueError(f"Orlicz-slice outer exponent must be in [1, inf), got {self.r}")
        if self.t <= 0:
            raise ValueError(f"Orlicz-slice radius must be positive, got {self.t}")

    def to_dict(self) -> Dict:
        return {"space": self.kind, "phi": self.phi.to_dict(), "r": self.r, "t": self.t}


SPACE_KINDS = ("lebesgue", "weighted_lebesgue", "morrey", "mixed", "variable", "orlicz", "orlicz_slice")


def space_from_dict(data: Dict) -> SpaceSpec:
    """Parse the JSON form, e.g. {"space": "morrey", "r": 1, "alpha": 2}.

    Raises:
        ValueError: On an unknown tag, missing fields or invalid parameters
    """
    kind = data.get("space")
    try:
        if kind == "lebesgue":
            return Lebesgue(float(data["p"]))
        if kind == "weighted_lebesgue":
            return WeightedLebesgue(float(data["p"]), WeightSpec.from_dict(data["weight"]))
        if kind == "morrey":
            return Morrey(float(data["r"]), float(data["alpha"]))
        if kind == "mixed":
            return MixedNorm(tuple(data["r"]))
        if kind == "variable":
            return VariableLebesgue(ExponentSpec.from_dict(data["exponent"]))
        if kind == "orlicz":
            return Orlicz(OrliczSpec.from_dict(data["phi"]))
        if kind == "orlicz_slice":
            return OrliczSlice(OrliczSpec.from_dict(data["phi"]), float(data["r"]), float(data["t"]))
    except KeyError as e:
        raise ValueError(f"Space '{kind}' is missing field {e}")
    raise ValueError(f"Unknown space '{kind}'; expected one of {', '.join(SPACE_KINDS)}")


# Norm evaluation

def luxemburg_norm(modular: Callable[[float], float], scale: float,
                   rel_tol: Optional[float] = None,
                   max_iter: Optional[int] = None) -> float:
    """inf{lam > 0 : modular(lam) <= 1} for a modular decreasing in lam.

    Args:
        modular: lam -> modular of f / lam
        scale: Positive starting guess (typically max |f|)
        rel_tol: Relative bracket width at which bisection stops
        max_iter: Bisection iteration cap

    Raises:
        RuntimeError: If no bracket is found
    """
    rel_tol = LUXEMBURG_REL_TOL if rel_tol is None else rel_tol
    max_iter = LUXEMBURG_MAX_ITER if max_iter is None else max_iter
    if scale <= 0:
        return 0.0
    hi = scale
    for _ in range(max_iter):
        if modular(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("Luxemburg bisection failed to find an upper bracket")
    lo = hi
    for _ in range(max_iter):
        lo *= 0.5
        if modular(lo) > 1.0:
            break
    else:
        raise RuntimeError("Luxemburg bisection failed to find a lower bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return 0.5 * (lo + hi)


def configure_numerics(rel_tol: float, max_iter: int) -> None:
    """Set the bisection tolerance and iteration cap used by every Luxemburg norm."""
    global LUXEMBURG_REL_TOL, LUXEMBURG_MAX_ITER
    if not 0 < rel_tol < 1 or max_iter < 1:
        raise ValueError(f"Invalid bisection settings rel_tol={rel_tol}, max_iter={max_iter}")
    LUXEMBURG_REL_TOL = float(rel_tol)
    LUXEMBURG_MAX_ITER = int(max_iter)


def weighted_lp_norm(f: GridFunction, p: float, weight: Optional[GridFunction] = None) -> float:
    """(integral |f|^p w)^(1/p); the maximum of |f| for p = inf."""
    if math.isinf(p):
        return f.max_abs()
    absf = np.abs(f.values)
    top = absf.max()
    if top == 0:
        return 0.0
    # Normalize before powering to keep large p finite
    terms = GridFunction(f.lattice, (absf / top) ** p)
    return float(top * integrate(terms, weight) ** (1.0 / p))


def ball_measure(radius: float, n: int) -> float:
    """Lebesgue measure of a Euclidean ball in R^n."""
    return float(np.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0) * radius ** n)


def morrey_radii(lattice: Lattice, steps_per_octave: int = DEFAULT_MORREY_STEPS) -> np.ndarray:
    """Every whole number of cells up to a few, then geometric up to the half diagonal."""
    h = min(lattice.spacing)
    half_diagonal = 0.5 * float(np.sqrt(sum(e * e for e in lattice.extent)))
    linear = np.arange(1, DEFAULT_MORREY_LINEAR_CELLS + 1) * h
    start = linear[-1]
    count = max(0, int(np.ceil(steps_per_octave * np.log2(half_diagonal / start))))
    geometric = start * 2.0 ** (np.arange(1, count + 1) / steps_per_octave)
    radii = np.concatenate([linear, geometric])
    return radii[radii <= half_diagonal * (1 + 1e-12)]


def _morrey_norm(space: Morrey, f: GridFunction) -> float:
    lattice = f.lattice
    n = lattice.dim
    power = np.abs(f.values) ** space.r * quadrature_weights(lattice)
    f3 = kernels.as3d(power)
    spacing = kernels.spacing3(lattice.spacing)
    stride = [space.center_stride if m > 1 else 1 for m in f3.shape]
    grids = np.meshgrid(*[np.arange(0, m, s) for m, s in zip(f3.shape, stride)], indexing="ij")
    targets = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    exponent = 1.0 / space.alpha - 1.0 / space.r

    # Exhausting ball: the whole window from its midpoint
    best = float(power.sum()) ** (1.0 / space.r)
    if exponent != 0.0:
        half_diagonal = 0.5 * float(np.sqrt(sum(e * e for e in lattice.extent)))
        best *= ball_measure(half_diagonal, n) ** exponent
    for radius in morrey_radii(lattice, space.steps_per_octave):
        sums, _ = kernels.ball_sums(f3, spacing, float(radius), targets)
        value = ball_measure(float(radius), n) ** exponent * float(sums.max()) ** (1.0 / space.r)
        best = max(best, value)
    return best


def _mixed_norm(space: MixedNorm, f: GridFunction) -> float:
    lattice = f.lattice
    if len(space.r_vec) != lattice.dim:
        raise ValueError(f"Mixed norm has {len(space.r_vec)} exponents for a {lattice.dim}-D field")
    current = np.abs(f.values)
    for axis, (r, h, m) in enumerate(zip(space.r_vec, lattice.spacing, lattice.points)):
        w = np.full(m, h)
        w[0] = w[-1] = 0.5 * h
        w = w.reshape((m,) + (1,) * (current.ndim - 1))
        if math.isinf(r):
            current = current.max(axis=0)
        else:
            current = np.sum(w * current ** r, axis=0) ** (1.0 / r)
    return float(current)


def _variable_norm(space: VariableLebesgue, f: GridFunction) -> float:
    exponent = space.exponent.sample(f.lattice).values
    absf = np.abs(f.values)
    weights = quadrature_weights(f.lattice)

    def modular(lam: float) -> float:
        return float(np.sum(weights * (absf / lam) ** exponent))

    return luxemburg_norm(modular, float(absf.max()))


def _orlicz_norm(phi: OrliczSpec, f: GridFunction) -> float:
    absf = np.abs(f.values)
    weights = quadrature_weights(f.lattice)

    def modular(lam: float) -> float:
        return float(np.sum(weights * phi.phi(absf / lam)))

    return luxemburg_norm(modular, float(absf.max()))


def slice_ratios(space: OrliczSlice, f: GridFunction) -> GridFunction:
    """Per-node ||f 1_B(x,t)||_Phi / ||1_B(x,t)||_Phi with |B| the quadrature sum."""
    ratios = kernels.slice_ratios(
        kernels.as3d(np.abs(f.values)),
        kernels.as3d(np.array(quadrature_weights(f.lattice))),
        kernels.spacing3(f.lattice.spacing),
        float(space.t),
        space.phi.code,
        float(space.phi.p),
        LUXEMBURG_REL_TOL,
        LUXEMBURG_MAX_ITER,
    )
    return GridFunction(f.lattice, ratios.reshape(f.lattice.shape))


def norm(space: SpaceSpec, f: GridFunction) -> float:
    """||f||_X for any supported space.

    Raises:
        ValueError: On parameters incompatible with the field
    """
    if isinstance(space, Lebesgue):
        return weighted_lp_norm(f, space.p)
    if isinstance(space, WeightedLebesgue):
        return weighted_lp_norm(f, space.p, sample_weight(space.w, f.lattice))
    if f.max_abs() == 0:
        return 0.0
    if isinstance(space, Morrey):
        return _morrey_norm(space, f)
    if isinstance(space, MixedNorm):
        return _mixed_norm(space, f)
    if isinstance(space, VariableLebesgue):
        return _variable_norm(space, f)
    if isinstance(space, Orlicz):
        return _orlicz_norm(space.phi, f)
    if isinstance(space, OrliczSlice):
        return weighted_lp_norm(slice_ratios(space, f), space.r)
    raise ValueError(f"Unsupported space {space!r}")


def modular(space: SpaceSpec, f: GridFunction, lam: float) -> float:
    """The Luxemburg modular of f / lam for the variable and Orlicz spaces."""
    weights = quadrature_weights(f.lattice)
    absf = np.abs(f.values) / lam
    if isinstance(space, VariableLebesgue):
        return float(np.sum(weights * absf ** space.exponent.sample(f.lattice).values))
    if isinstance(space, Orlicz):
        return float(np.sum(weights * space.phi.phi(absf)))
    raise ValueError(f"Space {space.kind} has no modular")


# Derived spaces

def convexify(space: SpaceSpec, s: float) -> SpaceSpec:
    """The s-convexification X^s, with ||f||_{X^s} = || |f|^s ||_X^(1/s).

    Raises:
        ValueError: If s <= 0 or the result is not representable
    """
    if not s > 0:
        raise ValueError(f"Convexification power must be positive, got {s}")
    try:
        if isinstance(space, Lebesgue):
            return Lebesgue(space.p * s)
        if isinstance(space, WeightedLebesgue):
            return WeightedLebesgue(space.p * s, space.w)
        if isinstance(space, Morrey):
            return Morrey(space.r * s, space.alpha * s, space.center_stride, space.steps_per_octave)
        if isinstance(space, MixedNorm):
            return MixedNorm(tuple(r * s for r in space.r_vec))
        if isinstance(space, VariableLebesgue):
            return VariableLebesgue(space.exponent.scaled(s))
        if isinstance(space, Orlicz) and space.phi.family == "power":
            return Orlicz(OrliczSpec("power", space.phi.p * s))
        if isinstance(space, OrliczSlice) and space.phi.family == "power":
            return OrliczSlice(OrliczSpec("power", space.phi.p * s), space.r * s, space.t)
    except ValueError as e:
        raise ValueError(f"Convexification of {space.label()} by {s} leaves the valid range: {e}")
    raise ValueError(f"Convexification of {space.label()} is not representable in the catalog")


def associate(space: SpaceSpec) -> SpaceSpec:
    """Catalogued Köthe dual.

    Raises:
        ValueError: If the associate space is not catalogued
    """
    if isinstance(space, Lebesgue):
        return Lebesgue(conjugate(space.p))
    if isinstance(space, WeightedLebesgue) and space.p > 1:
        p_dual = conjugate(space.p)
        return WeightedLebesgue(p_dual, space.w.power(1.0 - p_dual))
    if isinstance(space, Orlicz) and space.phi.family == "power" and space.phi.p > 1:
        return Orlicz(OrliczSpec("power", conjugate(space.phi.p)))
    raise ValueError(f"Associate space of {space.label()} is not catalogued")


def holder_pairing(f: GridFunction, g: GridFunction, space: SpaceSpec) -> Tuple[float, float]:
    """(integral |fg|, ||f||_X ||g||_X')."""
    dual = associate(space)
    lhs = integrate(GridFunction(f.lattice, np.abs(f.values * g.values)))
    rhs = norm(space, f) * norm(dual, g)
    return lhs, rhs


def ball_indicator(lattice: Lattice, center: Sequence[float], radius: float) -> GridFunction:
    coords = lattice.coordinates()
    c = np.asarray(center, dtype=np.float64)
    if c.size == 1 and lattice.dim > 1:
        c = np.full(lattice.dim, c[0])
    dist = np.sqrt(np.sum((coords - c) ** 2, axis=-1))
    return GridFunction(lattice, (dist <= radius * (1 + kernels.RADIUS_SLACK)).astype(np.float64))


def _probe_dual_norm(space: SpaceSpec, g: GridFunction, probes: List[GridFunction]) -> float:
    """Lower estimate of ||g||_X' as the largest pairing over probes."""
    best = 0.0
    for probe in probes:
        denominator = norm(space, probe)
        if denominator > 0:
            pairing = integrate(GridFunction(g.lattice, np.abs(probe.values * g.values)))
            best = max(best, pairing / denominator)
    return best


def indicator_duality(space: SpaceSpec, lattice: Lattice, center: Sequence[float], radius: float,
                      probes: Optional[List[GridFunction]] = None) -> float:
    """||1_B||_X ||1_B||_X' / |B| with |B| the quadrature measure.

    Spaces without a catalogued associate use the pairing supremum over
    probes; the probe set always contains 1_B itself.
    """
    indicator = ball_indicator(lattice, center, radius)
    measure = integrate(indicator)
    if measure <= 0:
        raise ValueError(f"Ball of radius {radius} contains no lattice node")
    try:
        dual_norm = norm(associate(space), indicator)
    except ValueError:
        family = [indicator] + [ball_indicator(lattice, center, radius * f) for f in (0.5, 2.0)]
        family += list(probes or [])
        dual_norm = _probe_dual_norm(space, indicator, family)
        logger.debug(f"Probe dual norm for {space.label()}: {dual_norm:.6g}")
    return norm(space, indicator) * dual_norm / measure


def space_exponent(space: SpaceSpec) -> float:
    """The integrability exponent entering the admissibility condition n(1/p - 1/q) < 1."""
    if isinstance(space, (Lebesgue, WeightedLebesgue)):
        return space.p
    if isinstance(space, Morrey):
        return space.r
    if isinstance(space, MixedNorm):
        return min(space.r_vec)
    if isinstance(space, VariableLebesgue):
        return space.exponent.r_minus
    if isinstance(space, Orlicz):
        return space.phi.p
    if isinstance(space, OrliczSlice):
        return min(space.phi.p, space.r)
    raise ValueError(f"Unsupported space {space!r}")
