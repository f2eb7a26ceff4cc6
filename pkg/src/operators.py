"""Maximal functions, ball averages, the Riesz potential and Rubio de Francia iteration.

The maximal operator is the uncentered ball maximal function restricted to
a finite candidate set (centers on a stride sub-lattice, geometric radii).
Averages are taken over the part of each ball inside the lattice window.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate as sp_integrate

from . import kernels
from .field import GridFunction, Lattice, gradient
from .spaces import Lebesgue, SpaceSpec, norm, weighted_lp_norm

logger = logging.getLogger(__name__)

DEFAULT_STEPS_PER_OCTAVE = 4
DEFAULT_STRIDE_1D = 1
DEFAULT_STRIDE_ND = 2
DEFAULT_K_MAX = 20
DEFAULT_HEADROOM = 1.5


@dataclass(frozen=True)
class MaximalConfig:
    """Candidate balls for the discrete maximal function."""

    mode: str
    radii: Tuple[float, ...]
    center_stride: int = 1

    def __post_init__(self):
        if self.mode not in ("centered", "uncentered"):
            raise ValueError(f"Unknown maximal mode '{self.mode}'")
        if not self.radii:
            raise ValueError("Maximal configuration needs at least one radius")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("Radii must be strictly increasing")
        if self.center_stride < 1:
            raise ValueError(f"Center stride must be >= 1, got {self.center_stride}")

    @classmethod
    def default(cls, lattice: Lattice, mode: str = "uncentered",
                steps_per_octave: int = DEFAULT_STEPS_PER_OCTAVE,
                center_stride: Optional[int] = None) -> "MaximalConfig":
        """Radii h * 2^(k/m) from one spacing up to the window diagonal."""
        h = min(lattice.spacing)
        diagonal = float(np.sqrt(sum(e * e for e in lattice.extent)))
        count = int(np.ceil(steps_per_octave * np.log2(diagonal / h))) + 1
        radii = tuple(float(h * 2.0 ** (k / steps_per_octave)) for k in range(count))
        if center_stride is None:
            center_stride = DEFAULT_STRIDE_1D if lattice.dim == 1 else DEFAULT_STRIDE_ND
        return cls(mode, radii, center_stride)


def _ball_means(f3: np.ndarray, spacing: np.ndarray, radius: float,
                targets: np.ndarray) -> np.ndarray:
    sums, counts = kernels.ball_sums(f3, spacing, radius, targets)
    return sums / counts


def _all_targets(shape3: Tuple[int, int, int], stride: Sequence[int] = (1, 1, 1)) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(0, n, s) for n, s in zip(shape3, stride)], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def ball_average(f: GridFunction, r: float) -> GridFunction:
    """Centered average B_r|f| at every node (balls clipped to the window)."""
    if r < min(f.lattice.spacing) * (1 - 1e-12):
        raise ValueError(f"Ball radius {r} is below the lattice spacing")
    f3 = kernels.as3d(np.abs(f.values))
    means = _ball_means(f3, kernels.spacing3(f.lattice.spacing), r, _all_targets(f3.shape))
    return GridFunction(f.lattice, means.reshape(f.lattice.shape))


def maximal(f: GridFunction, cfg: MaximalConfig) -> GridFunction:
    """Discrete Hardy-Littlewood maximal function of |f|.

    Uncentered mode starts from |f| (the limit of shrinking balls) and takes
    the largest average over candidate balls containing each node.
    """
    absf = np.abs(f.values)
    f3 = kernels.as3d(absf)
    spacing = kernels.spacing3(f.lattice.spacing)
    radii = np.asarray(cfg.radii, dtype=np.float64)
    if cfg.mode == "centered":
        targets = _all_targets(f3.shape)
        out = np.zeros(f3.size)
        for r in radii:
            out = np.maximum(out, _ball_means(f3, spacing, r, targets))
        return GridFunction(f.lattice, out.reshape(f.lattice.shape))

    stride = np.array([cfg.center_stride if n > 1 else 1 for n in f3.shape], dtype=np.int64)
    targets = _all_targets(f3.shape, stride)
    center_shape = tuple(len(range(0, n, s)) for n, s in zip(f3.shape, stride))
    means = np.empty((radii.size,) + center_shape)
    for index, r in enumerate(radii):
        means[index] = _ball_means(f3, spacing, r, targets).reshape(center_shape)
    out = kernels.uncentered_max(f3, means, stride, spacing, radii)
    return GridFunction(f.lattice, out.reshape(f.lattice.shape))


@lru_cache(maxsize=32)
def riesz_self_cell(spacing: Tuple[float, ...]) -> float:
    """Integral of |z|^(1-n) over the cell centred at the origin."""
    n = len(spacing)
    if n == 1:
        return spacing[0]
    half = [0.5 * h for h in spacing]
    if n == 2:
        a, b = half
        d = np.hypot(a, b)
        return float(4.0 * (a * np.log((b + d) / a) + b * np.log((a + d) / b)))

    # n = 3: integrate the distance to the box boundary over directions
    def radial_extent(phi, theta):
        direction = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
        return min(h / d for h, d in zip(half, direction) if d > 1e-300) * np.sin(theta)

    value, _ = sp_integrate.dblquad(radial_extent, 0.0, np.pi / 2, 0.0, np.pi / 2,
                                    epsabs=1e-12, epsrel=1e-10)
    return float(8.0 * value)


def riesz_potential(g: GridFunction, region_mask: Optional[np.ndarray] = None) -> GridFunction:
    """I_1(g)(x): lattice sum of g(y) |x-y|^(1-n) plus the analytic self-cell term.

    With a region mask, g is restricted to the region and so is the output.
    """
    values = g.values if region_mask is None else np.where(region_mask, g.values, 0.0)
    g3 = kernels.as3d(values)
    n = g.lattice.dim
    cell = g.lattice.cell_measure
    sources = np.argwhere(g3 != 0.0).astype(np.int64)
    sums = kernels.riesz_sums(g3, kernels.spacing3(g.lattice.spacing), sources,
                              float(n - 1), riesz_self_cell(g.lattice.spacing) / cell)
    out = (sums * cell).reshape(g.lattice.shape)
    if region_mask is not None:
        out = np.where(region_mask, out, 0.0)
    return GridFunction(g.lattice, out)


@dataclass
class RdFConfig:
    """Rubio de Francia iteration parameters; ``m_norm`` stands in for ||M||."""

    p: float
    m_norm: float
    k_max: int = DEFAULT_K_MAX
    weight: Optional[GridFunction] = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.m_norm < 1:
            raise ValueError(f"m_norm must be >= 1, got {self.m_norm}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")

    @property
    def tail_factor(self) -> float:
        return 2.0 ** (1 - self.k_max)


@dataclass
class RdFResult:
    values: GridFunction
    tail_bound: float


def rubio_de_francia(g: GridFunction, cfg: RdFConfig,
                     maximal_cfg: Optional[MaximalConfig] = None) -> RdFResult:
    """Truncated sum over k <= k_max of M^k|g| / (2 ||M||)^k."""
    mcfg = maximal_cfg or MaximalConfig.default(g.lattice)
    if mcfg.mode != "uncentered":
        raise ValueError("Rubio de Francia iteration uses the uncentered maximal operator")
    total = np.abs(g.values).copy()
    current = g.abs()
    for k in range(1, cfg.k_max + 1):
        current = maximal(current, mcfg)
        total += current.values / (2.0 * cfg.m_norm) ** k
    if cfg.weight is None:
        g_norm = norm(Lebesgue(cfg.p), g)
    else:
        g_norm = weighted_lp_norm(g, cfg.p, cfg.weight)
    logger.debug(f"Rubio de Francia: k_max={cfg.k_max}, m_norm={cfg.m_norm:.4g}")
    return RdFResult(GridFunction(g.lattice, total), cfg.tail_factor * g_norm)


def operator_norm_probe(space: SpaceSpec, probes: Sequence[GridFunction],
                        maximal_cfg: Optional[MaximalConfig] = None) -> float:
    """Largest ||Mf||_X / ||f||_X over the probes, floored at 1."""
    best = 1.0
    for probe in probes:
        denominator = norm(space, probe)
        if denominator == 0:
            raise ValueError("Probe functions must have nonzero norm")
        mcfg = maximal_cfg or MaximalConfig.default(probe.lattice)
        best = max(best, norm(space, maximal(probe, mcfg)) / denominator)
    return best


def lusin_lipschitz_ratio(f: GridFunction, cfg: Optional[MaximalConfig] = None,
                          pairs: int = 2000, seed: int = 0) -> float:
    """Largest |f(x)-f(y)| / (|x-y| (M|grad f|(x) + M|grad f|(y))) over random node pairs."""
    mcfg = cfg or MaximalConfig.default(f.lattice)
    mgrad = maximal(gradient(f).magnitude, mcfg).values.ravel()
    values = f.values.ravel()
    coords = f.lattice.coordinates().reshape(-1, f.lattice.dim)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, values.size, pairs)
    y = rng.integers(0, values.size, pairs)
    keep = x != y
    x, y = x[keep], y[keep]
    dist = np.sqrt(np.sum((coords[x] - coords[y]) ** 2, axis=1))
    denominator = dist * (mgrad[x] + mgrad[y])
    numerator = np.abs(values[x] - values[y])
    valid = denominator > 0
    if np.any(~valid & (numerator > 0)):
        return float("inf")
    if not np.any(valid):
        return 0.0
    return float(np.max(numerator[valid] / denominator[valid]))
