"""Compiled kernels checked against direct loops on small arrays."""
import numpy as np
import pytest

from src import kernels


def _nodes(shape):
    return [idx for idx in np.ndindex(*shape)]


def _distance(a, b, spacing):
    return float(np.sqrt(sum(((i - j) * h) ** 2 for i, j, h in zip(a, b, spacing))))


def _brute_counts(values, spacing, lam, beta, region):
    out = np.zeros(values.size, dtype=np.int64)
    for flat, x in enumerate(_nodes(values.shape)):
        if not region[x]:
            continue
        for y in _nodes(values.shape):
            if y == x or not region[y]:
                continue
            if abs(values[x] - values[y]) > lam * _distance(x, y, spacing) ** beta:
                out[flat] += 1
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_as3d_pads_trailing_axes():
    assert kernels.as3d(np.zeros(5)).shape == (5, 1, 1)
    assert kernels.as3d(np.zeros((4, 3))).shape == (4, 3, 1)
    assert kernels.spacing3((0.5,)).tolist() == [0.5, 1.0, 1.0]


def test_ball_sums_counts_interior_nodes():
    values = kernels.as3d(np.ones(21))
    targets = np.array([[10, 0, 0], [0, 0, 0]], dtype=np.int64)
    sums, counts = kernels.ball_sums(values, kernels.spacing3((0.1,)), 0.2, targets)
    assert counts.tolist() == [5, 3]
    assert sums.tolist() == [5.0, 3.0]


@pytest.mark.parametrize("shape,spacing", [((15,), (0.2,)), ((7, 6), (0.25, 0.5))])
def test_level_set_counts_match_direct_loop(rng, shape, spacing):
    values = rng.normal(size=shape)
    region = np.ones(shape, dtype=bool)
    region[0] = False
    reach = np.array([n for n in shape] + [0] * (3 - len(shape)), dtype=np.int64)
    counts = kernels.level_set_counts(kernels.as3d(values), kernels.spacing3(spacing), 0.7, 1.5,
                                      reach, False, kernels.as3d(region))
    expected = _brute_counts(values, spacing, 0.7, 1.5, region)
    assert counts.tolist() == expected.tolist()


def test_level_set_self_cell_adds_one_with_neighbour():
    values = np.array([0.0, 10.0, 0.0])
    reach = np.array([2, 0, 0], dtype=np.int64)
    region = kernels.as3d(np.ones(3))
    plain = kernels.level_set_counts(kernels.as3d(values), kernels.spacing3((1.0,)), 1.0, 2.0,
                                     reach, False, region)
    corrected = kernels.level_set_counts(kernels.as3d(values), kernels.spacing3((1.0,)), 1.0, 2.0,
                                         reach, True, region)
    assert plain.tolist() == [1, 2, 1]
    assert corrected.tolist() == [2, 3, 2]


def test_difference_quotient_sums_match_direct_loop(rng):
    values = rng.normal(size=(5, 4))
    spacing = (0.3, 0.2)
    out = kernels.difference_quotient_sums(kernels.as3d(values), kernels.spacing3(spacing), 2.0, 3.0)
    for flat, x in enumerate(_nodes(values.shape)):
        expected = sum(abs(values[x] - values[y]) ** 2 / _distance(x, y, spacing) ** 3
                       for y in _nodes(values.shape) if y != x)
        assert out[flat] == pytest.approx(expected, rel=1e-12)


def test_riesz_sums_with_flat_kernel():
    values = kernels.as3d(np.array([1.0, 2.0, 0.0, 4.0]))
    sources = np.argwhere(values != 0.0).astype(np.int64)
    out = kernels.riesz_sums(values, kernels.spacing3((0.5,)), sources, 0.0, 0.25)
    assert out.tolist() == pytest.approx([6.25, 5.5, 7.0, 4.0])


def test_slice_ratios_of_constant_are_constant():
    values = kernels.as3d(np.full(41, 3.0))
    weights = kernels.as3d(np.full(41, 0.05))
    for family in (0, 1):
        out = kernels.slice_ratios(values, weights, kernels.spacing3((0.05,)), 0.3, family, 2.0, 1e-12, 200)
        assert np.allclose(out, 3.0, rtol=1e-8)
