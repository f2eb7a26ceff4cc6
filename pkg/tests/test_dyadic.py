"""Tests for shifted dyadic systems and ball covering."""
from fractions import Fraction

import numpy as np
import pytest

from src import dyadic
from src.dyadic import (Box, DyadicCube, Nesting, PartialOverlapError, all_systems, cover_ball, cube_geometry,
                        locate, nesting_check, parent)

THIRD = Fraction(1, 3)


def test_cube_geometry_alternates_shift_sign():
    even = cube_geometry(DyadicCube((THIRD,), 0, (2,)))
    assert even.lower == (Fraction(7, 3),)
    assert even.side == 1
    odd = cube_geometry(DyadicCube((THIRD,), 1, (2,)))
    assert odd.lower == (Fraction(10, 3),)
    assert odd.side == 2
    fine = cube_geometry(DyadicCube((0, 0), -3, (1, -1)))
    assert fine.lower == (Fraction(1, 8), Fraction(-1, 8))


def test_invalid_shift_rejected():
    with pytest.raises(ValueError, match="Shift"):
        DyadicCube((Fraction(1, 2),), 0, (0,))
    with pytest.raises(ValueError):
        DyadicCube((0, 0), 0, (0,))


def test_dict_round_trip_recovers_exact_shift():
    cube = DyadicCube((THIRD, Fraction(2, 3)), -2, (3, -4))
    assert DyadicCube.from_dict(cube.to_dict()) == cube


def test_locate_contains_point():
    rng = np.random.default_rng(1)
    for _ in range(200):
        point = tuple(rng.uniform(-5, 5, 2))
        alpha = (THIRD, 0)
        j = int(rng.integers(-4, 4))
        cube = locate(point, alpha, j)
        assert cube.j == j
        assert cube_geometry(cube).contains_point(point)


def test_parent_nests_child():
    rng = np.random.default_rng(2)
    for _ in range(200):
        alpha = tuple(Fraction(int(a), 3) for a in rng.integers(0, 3, 2))
        child = locate(tuple(rng.uniform(-3, 3, 2)), alpha, int(rng.integers(-5, 5)))
        up = parent(child)
        assert up.j == child.j + 1
        assert nesting_check(child, up) == Nesting.FIRST_IN_SECOND
        assert nesting_check(up, child) == Nesting.SECOND_IN_FIRST


def test_nesting_cases():
    a = DyadicCube((0,), 0, (0,))
    assert nesting_check(a, a) == Nesting.EQUAL
    assert nesting_check(a, DyadicCube((0,), 0, (1,))) == Nesting.DISJOINT
    with pytest.raises(ValueError, match="one system"):
        nesting_check(a, DyadicCube((THIRD,), 0, (0,)))


def test_random_same_system_pairs_never_partially_overlap():
    rng = np.random.default_rng(3)
    for _ in range(500):
        alpha = (Fraction(int(rng.integers(0, 3)), 3),)
        c1 = locate((rng.uniform(-4, 4),), alpha, int(rng.integers(-3, 3)))
        c2 = locate((rng.uniform(-4, 4),), alpha, int(rng.integers(-3, 3)))
        assert isinstance(nesting_check(c1, c2), Nesting)


def test_partial_overlap_raises(monkeypatch):
    boxes = {0: Box((Fraction(0),), Fraction(1)), 1: Box((Fraction(1, 2),), Fraction(1))}
    monkeypatch.setattr(dyadic, "cube_geometry", lambda c: boxes[c.k[0]])
    with pytest.raises(PartialOverlapError):
        nesting_check(DyadicCube((0,), 0, (0,)), DyadicCube((0,), 0, (1,)))


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_cover_ball_bounds(dim):
    rng = np.random.default_rng(dim)
    for _ in range(300):
        center = tuple(float(c) for c in rng.uniform(-10, 10, dim))
        radius = float(2.0 ** rng.uniform(-8, 8))
        cube, ratio = cover_ball(center, radius, dim)
        assert cube_geometry(cube).closure_contains_ball(center, radius)
        assert 1.0 <= ratio <= 6.0


def test_cover_ball_at_dyadic_boundary():
    # A ball touching a scale-0 grid line of the unshifted system
    cube, ratio = cover_ball((0.5,), 0.5, 1)
    assert cube_geometry(cube).closure_contains_ball((0.5,), 0.5)
    assert ratio <= 6.0


def test_cover_ball_validation():
    with pytest.raises(ValueError, match="positive"):
        cover_ball((0.0,), 0.0, 1)
    with pytest.raises(ValueError, match="coordinates"):
        cover_ball((0.0, 1.0), 1.0, 1)


def test_all_systems():
    systems = all_systems(2)
    assert len(systems) == 9
    assert len(set(systems)) == 9
    assert (THIRD, Fraction(2, 3)) in systems
