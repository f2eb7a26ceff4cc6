"""Tests for level-set measures, the weak and strong functionals and K(q,n)."""
import math
import time

import numpy as np
import pytest

from src.bsvy import (LevelSetParams, LevelSetProfile, gagliardo_seminorm, gradient_norm, lambda_grid,
                      level_set_counts, limit_estimate, limit_reference, measure_field, r_max,
                      sphere_constant, strong_functional, weak_functional)
from src.field import FunctionSpec, GridFunction, make_lattice, sample
from src.spaces import Lebesgue


@pytest.fixture
def hat():
    lattice = make_lattice(1, -2.0, 2.0, 4097)
    return sample(FunctionSpec("smoothed-hat", center=(0.0,), radius=1.0, k=16), lattice)


@pytest.fixture
def ramp():
    lattice = make_lattice(1, 0.0, 4.0, 401)
    return GridFunction(lattice, lattice.axes()[0].copy())


def test_level_set_params():
    assert LevelSetParams(2.0, 1.0, 3.0).beta(2) == pytest.approx(2.0)
    for args in [(0.0, 1.0, 1.0), (1.0, -0.5, 1.0), (1.0, 1.0, 0.0)]:
        with pytest.raises(ValueError):
            LevelSetParams(*args)


def test_linear_slope_count(ramp):
    # |x - y| > lam |x - y|^2 holds for 0 < |x - y| < 1 / lam = 0.105
    params = LevelSetParams(1.0, 1.0, 1.0 / 0.105)
    counts = level_set_counts(ramp, params)
    assert counts[200] == 20
    measure = measure_field(ramp, params).values[200]
    assert measure == pytest.approx(2 * 0.105, abs=2 * 0.01)
    assert level_set_counts(ramp, params, self_cell=True)[200] == 21


def test_constant_field_has_empty_level_sets():
    lattice = make_lattice(2, -1.0, 1.0, 21)
    f = GridFunction(lattice, np.full(lattice.shape, 3.0))
    assert not np.any(measure_field(f, LevelSetParams(1.0, 0.5, 0.01)).values)


def test_large_lambda_gives_zero(ramp):
    lam = 1e6
    assert r_max(ramp, 1.0, 1.0, lam) < ramp.lattice.spacing[0]
    assert not np.any(level_set_counts(ramp, LevelSetParams(1.0, 1.0, lam)))


@pytest.mark.parametrize("dim,points", [(1, 301), (2, 31)])
def test_accelerated_matches_brute(dim, points):
    lattice = make_lattice(dim, -1.5, 1.5, points)
    f = sample(FunctionSpec("smooth-bump", center=(0.1,) * dim, radius=1.0), lattice)
    for lam in (0.5, 5.0, 50.0):
        params = LevelSetParams(2.0, 0.5, lam)
        brute = level_set_counts(f, params, "brute", self_cell=True)
        accelerated = level_set_counts(f, params, "accelerated", self_cell=True)
        assert np.array_equal(brute, accelerated)


def _random_case(seed):
    rng = np.random.default_rng(seed)
    if seed % 5 == 4:
        lattice = make_lattice(2, -1.0, 1.0, int(rng.integers(15, 22)))
    else:
        lattice = make_lattice(1, -1.5, 1.5, int(rng.integers(101, 302)))
    f = GridFunction(lattice, rng.standard_normal(lattice.shape))
    params = LevelSetParams(float(rng.uniform(0.5, 4.0)), float(rng.uniform(0.05, 1.0)),
                            float(10.0 ** rng.uniform(-1.0, 2.0)))
    return f, params, bool(seed % 2)


@pytest.mark.parametrize("seed", range(50))
def test_accelerated_matches_brute_random(seed):
    f, params, self_cell = _random_case(seed)
    brute = level_set_counts(f, params, "brute", self_cell=self_cell)
    accelerated = level_set_counts(f, params, "accelerated", self_cell=self_cell)
    assert np.array_equal(brute, accelerated)


def test_accelerated_speedup_at_top_decade():
    lattice = make_lattice(1, -2.0, 2.0, 2 ** 12 + 1)
    f = sample(FunctionSpec("smooth-bump", center=(0.0,), radius=1.0), lattice)
    lam = float(lambda_grid(f, 1.0, 1.0)[-1])
    params = LevelSetParams(1.0, 1.0, lam)
    # compile both paths first
    small = sample(f.provenance, make_lattice(1, -2.0, 2.0, 33))
    level_set_counts(small, params, "brute")
    level_set_counts(small, params, "accelerated")

    started = time.perf_counter()
    brute = level_set_counts(f, params, "brute")
    brute_time = time.perf_counter() - started
    accelerated_time = math.inf
    for _ in range(3):
        started = time.perf_counter()
        accelerated = level_set_counts(f, params, "accelerated")
        accelerated_time = min(accelerated_time, time.perf_counter() - started)
    assert np.array_equal(brute, accelerated)
    assert brute_time >= 5.0 * accelerated_time


@pytest.mark.parametrize("c", [2.0, -0.5, 4.0])
def test_level_set_homogeneity(c):
    lattice = make_lattice(1, -1.5, 1.5, 301)
    f = sample(FunctionSpec("smooth-bump", center=(0.1,), radius=1.0), lattice)
    scaled = GridFunction(lattice, c * f.values)
    for lam in (0.5, 5.0, 50.0):
        for q, s in ((1.0, 1.0), (2.0, 0.5)):
            lhs = level_set_counts(scaled, LevelSetParams(q, s, lam), self_cell=True)
            rhs = level_set_counts(f, LevelSetParams(q, s, lam / abs(c)), self_cell=True)
            assert np.array_equal(lhs, rhs)


@pytest.mark.parametrize("dim,points", [(1, 301), (2, 31)])
def test_level_set_sign_and_reflection_symmetry(dim, points):
    lattice = make_lattice(dim, -1.5, 1.5, points)
    f = sample(FunctionSpec("smooth-bump", center=(0.2,) * dim, radius=1.0), lattice)
    negated = GridFunction(lattice, -f.values)
    reflected = GridFunction(lattice, f.values[(slice(None, None, -1),) * dim].copy())
    for lam in (0.5, 5.0):
        params = LevelSetParams(2.0, 0.5, lam)
        counts = level_set_counts(f, params)
        assert np.array_equal(level_set_counts(negated, params), counts)
        mirrored = level_set_counts(reflected, params)
        assert np.array_equal(mirrored[(slice(None, None, -1),) * dim], counts)
        assert mirrored.sum() == counts.sum()


def test_unknown_mode(ramp):
    with pytest.raises(ValueError, match="scan mode"):
        level_set_counts(ramp, LevelSetParams(1.0, 1.0, 1.0), mode="fast")


def test_region_restricts_both_points(ramp):
    params = LevelSetParams(1.0, 1.0, 1.0 / 0.105)
    region = ramp.lattice.axes()[0] < 2.0
    restricted = level_set_counts(ramp, params, region=region)
    full = level_set_counts(ramp, params)
    assert np.all(restricted[~region] == 0)
    assert np.all(restricted <= full)
    # Node just inside the boundary loses its right-hand partners
    assert restricted[199] == 10
    with pytest.raises(ValueError, match="Region shape"):
        level_set_counts(ramp, params, region=np.ones(3, dtype=bool))


def test_lambda_grid(hat):
    grid = lambda_grid(hat, 1.0, 1.0)
    assert grid.size == 48
    assert np.all(np.diff(grid) > 0)
    assert np.count_nonzero(grid >= grid[-1] / 10.0 * (1 - 1e-12)) >= 8
    assert r_max(hat, 1.0, 1.0, float(grid[0])) <= 0.25 * 4.0 * (1 + 1e-9)


def test_lambda_grid_edge_cases(ramp):
    zero = GridFunction(ramp.lattice, np.zeros(ramp.lattice.shape))
    assert np.allclose(lambda_grid(zero, 1.0, 1.0, points=16), np.geomspace(1.0, 1e3, 16))
    with pytest.raises(ValueError, match="too small"):
        lambda_grid(ramp, 1.0, 1.0, max_reach_fraction=1e-4)
    with pytest.raises(ValueError):
        lambda_grid(ramp, 1.0, 1.0, points=1)


def test_limit_estimate():
    lam = np.geomspace(1.0, 1e3, 31)
    estimate, spread = limit_estimate(LevelSetProfile(lam, np.full(31, 2.0)))
    assert estimate == 2.0
    assert spread == 0.0
    with pytest.raises(ValueError, match="Top decade"):
        limit_estimate(LevelSetProfile(np.geomspace(1.0, 1e3, 6), np.ones(6)))


def test_profile_validation(tmp_path):
    with pytest.raises(ValueError):
        LevelSetProfile(np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        LevelSetProfile(np.ones(2), np.array([1.0, -1.0]))
    profile = LevelSetProfile(np.array([1.0, 2.0]), np.array([0.5, 0.25]))
    assert profile.sup_value == 0.5
    assert profile.sup_lambda == 1.0
    assert profile.summary()["sup_lambda"] == 1.0
    path = tmp_path / "profile.csv"
    profile.to_csv(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "lambda,value,r_max_cells,pair_count"
    assert len(lines) == 3


def test_weak_functional_limit_identity(hat):
    profile = weak_functional(hat, Lebesgue(1.0), 1.0, 1.0, self_cell_correction=True)
    assert profile.reliable
    reference = limit_reference(hat, Lebesgue(1.0), 1.0)
    assert reference == pytest.approx(2.0 * gradient_norm(hat, Lebesgue(1.0)))
    assert abs(profile.limit_estimate - reference) / reference <= 0.03
    assert profile.sup_value >= profile.limit_estimate * (1 - 1e-12)


def test_weak_functional_excludes_self_cell_by_default(ramp):
    grid = np.geomspace(1.0, 50.0, 16)
    plain = weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=grid, limit=False)
    explicit = weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=grid, limit=False,
                               self_cell_correction=False)
    corrected = weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=grid, limit=False,
                                self_cell_correction=True)
    assert np.array_equal(plain.values, explicit.values)
    assert np.all(corrected.values > plain.values)


def test_weak_functional_of_constant():
    lattice = make_lattice(1, -1.0, 1.0, 201)
    f = GridFunction(lattice, np.ones(lattice.shape))
    profile = weak_functional(f, Lebesgue(2.0), 2.0, 0.5)
    assert profile.sup_value == 0.0
    assert not np.any(profile.values)


def test_weak_functional_explicit_grid(ramp):
    with pytest.raises(ValueError, match="at least 16"):
        weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=np.geomspace(1.0, 10.0, 5))
    grid = np.geomspace(1.0, 50.0, 16)
    profile = weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=grid[::-1], limit=False)
    assert np.array_equal(profile.lambda_grid, grid)
    assert profile.limit_estimate is None
    region = ramp.lattice.axes()[0] < 2.0
    restricted = weak_functional(ramp, Lebesgue(1.0), 1.0, 1.0, lambdas=grid, limit=False, region=region)
    assert np.all(restricted.values <= profile.values)


def test_strong_functional(hat):
    lattice = make_lattice(1, -2.0, 2.0, 257)
    coarse = sample(hat.provenance, lattice)
    assert strong_functional(GridFunction(lattice, np.ones(lattice.shape)), Lebesgue(2.0), 2.0, 0.5) == 0.0
    value = gagliardo_seminorm(coarse, 2.0, 0.5)
    assert value > 0
    assert value == pytest.approx(strong_functional(coarse, Lebesgue(2.0), 2.0, 0.5))
    with pytest.raises(ValueError):
        strong_functional(coarse, Lebesgue(2.0), 2.0, 0.0)
    with pytest.raises(ValueError):
        strong_functional(coarse, Lebesgue(2.0), 0.0, 0.5)


def test_gradient_norm_analytic_matches_numeric(hat):
    analytic = gradient_norm(hat, Lebesgue(2.0))
    numeric = gradient_norm(hat, Lebesgue(2.0), analytic=False)
    assert analytic == pytest.approx(numeric, rel=1e-3)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_constant_methods_agree(q, n):
    k = sphere_constant(q, n)
    assert k.value > 0
    assert abs(k.closed_form - k.quadrature) <= 1e-8 * max(1.0, k.quadrature)


def test_sphere_constant_known_values():
    assert sphere_constant(3.0, 1).value == 2.0
    assert sphere_constant(2.0, 2).value == pytest.approx(math.pi, abs=1e-8)
    assert sphere_constant(1.0, 2).value == pytest.approx(4.0, abs=1e-8)
    assert sphere_constant(2.0, 3, "closed-form").value == pytest.approx(4.0 * math.pi / 3.0)


def test_sphere_constant_angular_rule_known_values():
    # 4 pi / 3 in R^3 and the circle integral of |cos| in R^2
    assert sphere_constant(2.0, 3).quadrature == pytest.approx(4.0 * math.pi / 3.0, abs=1e-12)
    assert sphere_constant(1.0, 2).quadrature == pytest.approx(4.0, abs=1e-12)
    assert sphere_constant(1.0, 3).quadrature == pytest.approx(2.0 * math.pi, abs=1e-12)


def test_sphere_constant_trapezoid_in_the_plane():
    assert sphere_constant(2.0, 2).trapezoid == pytest.approx(math.pi, abs=1e-12)
    assert sphere_constant(1.0, 2).trapezoid == pytest.approx(4.0, abs=1e-5)
    kinked = sphere_constant(0.5, 2)
    assert kinked.trapezoid == pytest.approx(kinked.closed_form, rel=1e-3)
    assert sphere_constant(2.0, 1).trapezoid is None
    assert sphere_constant(2.0, 3).trapezoid is None


def test_sphere_constant_validation():
    with pytest.raises(ValueError):
        sphere_constant(0.0, 2)
    with pytest.raises(ValueError):
        sphere_constant(1.0, 4)
    with pytest.raises(ValueError):
        sphere_constant(1.0, 2, "monte-carlo")
