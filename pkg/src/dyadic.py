"""Shifted dyadic cube systems and ball covering.

For alpha in {0, 1/3, 2/3}^n the system D^alpha consists of the half-open
cubes 2^j (k + [0,1)^n + (-1)^j alpha). Cubes of one system are nested or
disjoint, and every ball sits in a cube of comparable side from one of the
3^n systems. Geometry is computed with exact rationals so that boundary
cases are decided without rounding.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

logger = logging.getLogger(__name__)

SHIFTS = (Fraction(0), Fraction(1, 3), Fraction(2, 3))

# Covering search window: 2^j in [diam, SCALE_WINDOW * diam]
SCALE_WINDOW = 8


class PartialOverlapError(RuntimeError):
    """Two same-system cubes overlap without nesting."""


class Nesting(Enum):
    DISJOINT = "disjoint"
    FIRST_IN_SECOND = "c1_in_c2"
    SECOND_IN_FIRST = "c2_in_c1"
    EQUAL = "equal"


def _shift(value) -> Fraction:
    shift = Fraction(value).limit_denominator(3)
    if shift not in SHIFTS:
        raise ValueError(f"Shift {value} is not one of 0, 1/3, 2/3")
    return shift


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box [lower, lower + side) per axis."""

    lower: Tuple[Fraction, ...]
    side: Fraction

    @property
    def upper(self) -> Tuple[Fraction, ...]:
        return tuple(l + self.side for l in self.lower)

    def contains_point(self, point: Sequence) -> bool:
        return all(l <= Fraction(x) < u for l, x, u in zip(self.lower, point, self.upper))

    def closure_contains_ball(self, center: Sequence, radius) -> bool:
        r = Fraction(radius)
        return all(
            l <= Fraction(c) - r and Fraction(c) + r <= u
            for l, c, u in zip(self.lower, center, self.upper)
        )


@dataclass(frozen=True)
class DyadicCube:
    """Element 2^j (k + [0,1)^n + (-1)^j alpha) of the system D^alpha."""

    alpha: Tuple[Fraction, ...]
    j: int
    k: Tuple[int, ...]

    def __post_init__(self):
        if len(self.alpha) != len(self.k):
            raise ValueError("alpha and k must have the same length")
        object.__setattr__(self, "alpha", tuple(_shift(a) for a in self.alpha))
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))

    @property
    def dim(self) -> int:
        return len(self.k)

    @property
    def side(self) -> Fraction:
        return Fraction(2) ** self.j

    def to_dict(self) -> Dict:
        return {"alpha": [float(a) for a in self.alpha], "j": self.j, "k": list(self.k)}

    @classmethod
    def from_dict(cls, data: Dict) -> "DyadicCube":
        return cls(tuple(data["alpha"]), int(data["j"]), tuple(data["k"]))


def _sign(j: int) -> int:
    return 1 if j % 2 == 0 else -1


def cube_geometry(c: DyadicCube) -> Box:
    """Lower corner 2^j (k + (-1)^j alpha) and side 2^j."""
    side = c.side
    sign = _sign(c.j)
    return Box(tuple(side * (k + sign * a) for k, a in zip(c.k, c.alpha)), side)


def nesting_check(c1: DyadicCube, c2: DyadicCube) -> Nesting:
    """Classify two cubes of the same system.

    Raises:
        ValueError: If the cubes belong to different systems
        PartialOverlapError: If the cubes overlap without nesting
    """
    if c1.alpha != c2.alpha:
        raise ValueError("Nesting is only defined within one system D^alpha")
    b1, b2 = cube_geometry(c1), cube_geometry(c2)
    if any(u1 <= l2 or u2 <= l1 for l1, u1, l2, u2 in zip(b1.lower, b1.upper, b2.lower, b2.upper)):
        return Nesting.DISJOINT
    if b1 == b2:
        return Nesting.EQUAL
    first_in_second = all(l2 <= l1 and u1 <= u2
                          for l1, u1, l2, u2 in zip(b1.lower, b1.upper, b2.lower, b2.upper))
    if first_in_second:
        return Nesting.FIRST_IN_SECOND
    second_in_first = all(l1 <= l2 and u2 <= u1
                          for l1, u1, l2, u2 in zip(b1.lower, b1.upper, b2.lower, b2.upper))
    if second_in_first:
        return Nesting.SECOND_IN_FIRST
    raise PartialOverlapError(f"Cubes {c1} and {c2} overlap without nesting")


def locate(point: Sequence, alpha: Sequence, j: int) -> DyadicCube:
    """The cube of D^alpha at scale j containing a point."""
    alpha = tuple(_shift(a) for a in alpha)
    side = Fraction(2) ** j
    sign = _sign(j)
    k = tuple(math.floor(Fraction(x) / side - sign * a) for x, a in zip(point, alpha))
    return DyadicCube(alpha, j, k)


def parent(c: DyadicCube) -> DyadicCube:
    """The unique cube one scale up in the same system containing c."""
    return locate(cube_geometry(c).lower, c.alpha, c.j + 1)


def _axis_cover(center: Fraction, radius: Fraction, j: int):
    """First shift whose scale-j interval covers [center - r, center + r], or None."""
    side = Fraction(2) ** j
    sign = _sign(j)
    for a in SHIFTS:
        k = math.floor((center - radius) / side - sign * a)
        lower = side * (k + sign * a)
        if center + radius <= lower + side:
            return a, k
    return None


def cover_ball(center: Sequence, radius: float, n: int) -> Tuple[DyadicCube, float]:
    """Smallest cube from the 3^n systems whose closure contains the closed ball.

    Returns:
        Tuple[DyadicCube, float]: The cube and its side over the ball diameter
    """
    if radius <= 0:
        raise ValueError(f"Ball radius must be positive, got {radius}")
    if len(center) != n:
        raise ValueError(f"Center has {len(center)} coordinates, expected {n}")
    c = [Fraction(x) for x in center]
    r = Fraction(radius)
    diam = 2 * r
    j = math.floor(math.log2(float(diam))) - 1
    while Fraction(2) ** j < diam:
        j += 1
    while Fraction(2) ** j <= SCALE_WINDOW * diam:
        hits = [_axis_cover(ci, r, j) for ci in c]
        if all(hit is not None for hit in hits):
            cube = DyadicCube(tuple(a for a, _ in hits), j, tuple(k for _, k in hits))
            return cube, float(cube.side / diam)
        j += 1
    # The one-third trick guarantees success inside the window
    raise RuntimeError(f"No covering cube found for ball center={center}, radius={radius}")


def all_systems(n: int) -> List[Tuple[Fraction, ...]]:
    """The 3^n shift vectors."""
    return list(itertools.product(SHIFTS, repeat=n))
