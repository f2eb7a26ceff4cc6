"""Tests for the ball Banach function space norms and derived spaces."""
import math

import numpy as np
import pytest

from src import spaces
from src.field import FunctionSpec, GridFunction, make_lattice, sample
from src.spaces import (ExponentSpec, Lebesgue, MixedNorm, Morrey, Orlicz, OrliczSlice, OrliczSpec,
                        VariableLebesgue, WeightedLebesgue, associate, ball_indicator, ball_measure,
                        configure_numerics, conjugate, convexify, holder_pairing, indicator_duality,
                        luxemburg_norm, modular, norm, space_exponent, space_from_dict)
from src.weights import WeightSpec


@pytest.fixture
def line():
    return make_lattice(1, -4.0, 4.0, 801)


@pytest.fixture
def bump(line):
    return sample(FunctionSpec("smooth-bump", center=(0.0,), radius=1.0, height=2.0), line)


def test_conjugate():
    assert conjugate(1) == math.inf
    assert conjugate(math.inf) == 1.0
    assert conjugate(3.0) == pytest.approx(1.5)


def test_lebesgue_of_constant():
    lattice = make_lattice(1, 0.0, 1.0, 101)
    f = GridFunction(lattice, np.full(lattice.shape, 2.0))
    assert norm(Lebesgue(3.0), f) == pytest.approx(2.0)
    assert norm(Lebesgue(math.inf), f) == 2.0


def test_weighted_constant_weight_scales(bump):
    plain = norm(Lebesgue(2.0), bump)
    weighted = norm(WeightedLebesgue(2.0, WeightSpec("constant", value=4.0)), bump)
    assert weighted == pytest.approx(2.0 * plain)


def test_morrey_with_equal_exponents_is_lebesgue(bump):
    assert norm(Morrey(2.0, 2.0), bump) == pytest.approx(norm(Lebesgue(2.0), bump), rel=1e-10)


def test_morrey_of_indicator():
    lattice = make_lattice(1, -2.0, 2.0, 801)
    indicator = ball_indicator(lattice, (0.0,), 0.5)
    # sup_B |B|^(-1/2) |B cap [-1/2, 1/2]| is attained at the interval itself
    assert norm(Morrey(1.0, 2.0), indicator) == pytest.approx(1.0, rel=0.03)


def test_mixed_norm_with_equal_exponents_is_lebesgue():
    lattice = make_lattice(2, -1.5, 1.5, 61)
    f = sample(FunctionSpec("smooth-bump", center=(0.1, -0.2), radius=1.0), lattice)
    assert norm(MixedNorm((3.0, 3.0)), f) == pytest.approx(norm(Lebesgue(3.0), f), rel=1e-10)
    with pytest.raises(ValueError, match="exponents"):
        norm(MixedNorm((2.0,)), f)


def test_constant_variable_exponent_is_lebesgue(bump):
    variable = VariableLebesgue(ExponentSpec("constant", 2.5))
    assert norm(variable, bump) == pytest.approx(norm(Lebesgue(2.5), bump), rel=1e-8)


def test_power_orlicz_is_lebesgue(bump):
    assert norm(Orlicz(OrliczSpec("power", 1.5)), bump) == pytest.approx(norm(Lebesgue(1.5), bump), rel=1e-8)


def test_orlicz_log_exceeds_power(bump):
    assert norm(Orlicz(OrliczSpec("power_log", 2.0)), bump) > norm(Lebesgue(2.0), bump)


def test_orlicz_slice_matches_lebesgue_away_from_boundary(bump):
    space = OrliczSlice(OrliczSpec("power", 2.0), 2.0, 0.5)
    assert norm(space, bump) == pytest.approx(norm(Lebesgue(2.0), bump), rel=1e-2)


def test_zero_field_has_zero_norm(line):
    zero = GridFunction(line, np.zeros(line.shape))
    assert norm(Morrey(1.0, 2.0), zero) == 0.0
    assert norm(Orlicz(OrliczSpec("power_log", 1.0)), zero) == 0.0


def test_luxemburg_norm_bisection():
    assert luxemburg_norm(lambda lam: (3.0 / lam) ** 2, 1.0) == pytest.approx(3.0, rel=1e-9)
    assert luxemburg_norm(lambda lam: 1.0, 0.0) == 0.0
    with pytest.raises(RuntimeError, match="upper bracket"):
        luxemburg_norm(lambda lam: 2.0, 1.0, max_iter=20)


def test_configure_numerics(monkeypatch):
    monkeypatch.setattr(spaces, "LUXEMBURG_REL_TOL", spaces.LUXEMBURG_REL_TOL)
    monkeypatch.setattr(spaces, "LUXEMBURG_MAX_ITER", spaces.LUXEMBURG_MAX_ITER)
    configure_numerics(1e-6, 50)
    assert spaces.LUXEMBURG_REL_TOL == 1e-6
    assert spaces.LUXEMBURG_MAX_ITER == 50
    with pytest.raises(ValueError):
        configure_numerics(2.0, 50)
    with pytest.raises(ValueError):
        configure_numerics(1e-6, 0)


def test_modular(bump):
    orlicz = Orlicz(OrliczSpec("power", 2.0))
    lam = norm(orlicz, bump)
    assert modular(orlicz, bump, lam) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(ValueError, match="no modular"):
        modular(Lebesgue(2.0), bump, 1.0)


def test_convexify_identity(bump):
    space = Orlicz(OrliczSpec("power", 1.5))
    convex = convexify(space, 2.0)
    assert convex == Orlicz(OrliczSpec("power", 3.0))
    squared = GridFunction(bump.lattice, np.abs(bump.values) ** 2)
    assert norm(convex, bump) == pytest.approx(norm(space, squared) ** 0.5, rel=1e-8)


def test_convexify_rejections():
    assert convexify(Lebesgue(2.0), 1.5) == Lebesgue(3.0)
    with pytest.raises(ValueError, match="positive"):
        convexify(Lebesgue(2.0), 0.0)
    with pytest.raises(ValueError, match="valid range"):
        convexify(Lebesgue(2.0), 0.25)
    with pytest.raises(ValueError, match="not representable"):
        convexify(Orlicz(OrliczSpec("power_log", 2.0)), 2.0)


def test_associate():
    assert associate(Lebesgue(1.0)) == Lebesgue(math.inf)
    weighted = associate(WeightedLebesgue(2.0, WeightSpec("power", a=-0.5)))
    assert weighted.p == pytest.approx(2.0)
    assert weighted.w.a == pytest.approx(0.5)
    with pytest.raises(ValueError, match="not catalogued"):
        associate(Morrey(1.0, 2.0))


def test_holder_pairing(bump):
    other = sample(FunctionSpec("hat", center=(0.5,), radius=1.5), bump.lattice)
    lhs, rhs = holder_pairing(bump, other, Lebesgue(3.0))
    assert lhs <= rhs


def test_indicator_duality(line):
    assert indicator_duality(Lebesgue(2.0), line, (0.0,), 1.0) == pytest.approx(1.0, rel=1e-10)
    assert indicator_duality(Morrey(1.0, 2.0), line, (0.0,), 1.0) >= 1.0 - 1e-12
    with pytest.raises(ValueError, match="no lattice node"):
        indicator_duality(Lebesgue(2.0), make_lattice(1, 0.0, 1.0, 3), (0.25,), 0.1)


def test_ball_measure():
    assert ball_measure(1.0, 1) == pytest.approx(2.0)
    assert ball_measure(1.0, 2) == pytest.approx(math.pi)
    assert ball_measure(2.0, 3) == pytest.approx(32.0 * math.pi / 3.0)


@pytest.mark.parametrize("space", [
    Lebesgue(2.0),
    WeightedLebesgue(1.5, WeightSpec("power", a=-0.5, center=(0.3,))),
    Morrey(1.0, 2.0),
    MixedNorm((1.0, 2.0)),
    VariableLebesgue(ExponentSpec("smoothed_step", 1.5, 3.0)),
    Orlicz(OrliczSpec("power_log", 2.0)),
    OrliczSlice(OrliczSpec("power", 2.0), 3.0, 0.5),
])
def test_space_dict_round_trip(space):
    assert space_from_dict(space.to_dict()) == space


def test_space_from_dict_errors():
    with pytest.raises(ValueError, match="Unknown space"):
        space_from_dict({"space": "besov"})
    with pytest.raises(ValueError, match="missing"):
        space_from_dict({"space": "morrey", "r": 1.0})
    with pytest.raises(ValueError):
        space_from_dict({"space": "morrey", "r": 3.0, "alpha": 2.0})


def test_space_exponent():
    assert space_exponent(MixedNorm((3.0, 1.5))) == 1.5
    assert space_exponent(OrliczSlice(OrliczSpec("power", 2.0), 1.5, 1.0)) == 1.5
    assert space_exponent(VariableLebesgue(ExponentSpec("smoothed_step", 1.2, 4.0))) == 1.2


def test_exponent_spec():
    with pytest.raises(ValueError):
        ExponentSpec("smoothed_step", 3.0, 2.0)
    with pytest.raises(ValueError):
        ExponentSpec("constant", 0.5)
    lattice = make_lattice(1, -2.0, 2.0, 41)
    values = ExponentSpec("smoothed_step", 1.5, 3.0).sample(lattice).values
    assert values.min() >= 1.5
    assert values.max() <= 3.0
    assert np.all(np.diff(values) >= 0)


def test_exponent_spec_axis():
    lattice = make_lattice(2, -1.0, 1.0, 9)
    spec = ExponentSpec("smoothed_step", 1.5, 3.0, axis=1)
    values = spec.sample(lattice).values
    # Constant along axis 0, increasing along axis 1
    assert np.allclose(values, values[:1, :])
    assert np.all(np.diff(values[0]) > 0)
    assert ExponentSpec.from_dict(spec.to_dict()) == spec
    assert spec.scaled(2.0).axis == 1
    with pytest.raises(ValueError, match="axis"):
        ExponentSpec("smoothed_step", 1.5, 3.0, axis=1).sample(make_lattice(1, -1.0, 1.0, 9))
    with pytest.raises(ValueError, match="axis"):
        ExponentSpec("constant", 2.0, axis=3)
