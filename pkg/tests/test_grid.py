import math

import numpy as np
import pytest

from splitting.errors import ConfigurationError, GridMismatchError, NonFiniteError, ValidationError
from splitting.expr import parse
from splitting.grid import GridFunction, NormSpec, derivative, make_grid, multi_indices, norm, sample

ALL_SPECS = [NormSpec(m, p) for m in (0, 1, 2) for p in (2, 4, math.inf)]


class TestMakeGrid:
    def test_spacing(self):
        grid = make_grid(1, 64)
        assert grid.spacing == pytest.approx(2 * math.pi / 64, rel=1e-15)
        assert grid.spacing * grid.points_per_axis == pytest.approx(grid.axis_length, rel=1e-15)

    def test_two_dimensional_size(self):
        grid = make_grid(2, 8)
        assert grid.size == 64
        assert grid.shape == (8, 8)

    @pytest.mark.parametrize("dim, m", [(1, 7), (1, 4), (1, 48), (3, 8), (0, 8)])
    def test_rejects_invalid(self, dim, m):
        with pytest.raises(ConfigurationError):
            make_grid(dim, m)


class TestSample:
    def test_zero(self, grid64):
        assert np.array_equal(sample(parse("0"), 0.3, grid64).values, np.zeros(64))

    def test_sine_nodes(self, grid64):
        u = sample(parse("sin(x1)"), 0.0, grid64)
        np.testing.assert_allclose(u.values, np.sin(2 * math.pi * np.arange(64) / 64), atol=1e-15)

    def test_time_dependence(self, grid64):
        u = sample(parse("exp(-t)*sin(x1)"), 1.0, grid64)
        np.testing.assert_allclose(u.values, math.exp(-1) * np.sin(grid64.coordinates[0]), atol=1e-15)

    def test_rejects_missing_axis(self, grid64):
        with pytest.raises(ValidationError):
            sample(parse("sin(x2)"), 0.0, grid64)

    def test_two_dimensional_indexing(self, grid2d):
        u = sample(parse("x1 + 10*x2"), 0.0, grid2d)
        h = grid2d.spacing
        assert u.values[3, 5] == pytest.approx(3 * h + 50 * h)


class TestGridFunction:
    def test_rejects_nan(self, grid64):
        values = np.zeros(64)
        values[5] = np.nan
        with pytest.raises(NonFiniteError):
            GridFunction(grid64, values)

    def test_rejects_wrong_length(self, grid64):
        with pytest.raises(GridMismatchError):
            GridFunction(grid64, np.zeros(63))

    def test_values_are_read_only(self, grid64):
        u = GridFunction.zeros(grid64)
        with pytest.raises(ValueError):
            u.values[0] = 1.0
        with pytest.raises(AttributeError):
            u.values = np.ones(64)

    def test_arithmetic_checks_grids(self, grid64, grid32):
        with pytest.raises(GridMismatchError):
            GridFunction.zeros(grid64) + GridFunction.zeros(grid32)

    def test_flat_is_row_major(self, grid2d):
        u = sample(parse("x1"), 0.0, grid2d)
        assert u.flat[16] == pytest.approx(grid2d.spacing)


class TestDerivative:
    def test_first_derivative_of_sine(self, grid64):
        du = derivative(sample(parse("sin(x1)"), 0.0, grid64), (1,))
        np.testing.assert_allclose(du.values, np.cos(grid64.coordinates[0]), atol=1e-12)

    def test_second_derivative_of_sine(self, grid64):
        du = derivative(sample(parse("sin(x1)"), 0.0, grid64), (2,))
        np.testing.assert_allclose(du.values, -np.sin(grid64.coordinates[0]), atol=1e-12)

    @pytest.mark.parametrize("orders", [(1,), (2,), (3,), (4,)])
    def test_constant_has_zero_derivatives(self, grid64, orders):
        du = derivative(GridFunction.constant(grid64, 3.7), orders)
        np.testing.assert_allclose(du.values, 0.0, atol=1e-12)

    def test_mixed_derivative(self, grid2d):
        u = sample(parse("sin(x1)*sin(2*x2)"), 0.0, grid2d)
        x1, x2 = grid2d.coordinates
        np.testing.assert_allclose(derivative(u, (1, 1)).values, 2 * np.cos(x1) * np.cos(2 * x2), atol=1e-12)

    def test_repeated_first_derivative_matches_second(self, grid64, random_field):
        u = random_field(grid64)
        twice = derivative(derivative(u, (1,)), (1,))
        direct = derivative(u, (2,))
        scale = np.max(np.abs(direct.values))
        np.testing.assert_allclose(twice.values, direct.values, atol=1e-11 * scale)

    def test_rejects_order_above_four(self, grid64):
        with pytest.raises(ValidationError):
            derivative(GridFunction.zeros(grid64), (5,))

    def test_rejects_wrong_arity(self, grid64):
        with pytest.raises(ValidationError):
            derivative(GridFunction.zeros(grid64), (1, 0))


class TestNorm:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
    def test_zero(self, grid64, spec):
        assert norm(GridFunction.zeros(grid64), spec) == 0.0

    def test_sine_l2(self, grid64):
        u = sample(parse("sin(x1)"), 0.0, grid64)
        assert norm(u, NormSpec(0, 2)) == pytest.approx(math.sqrt(math.pi), abs=1e-6)

    def test_sine_sup(self, grid64):
        assert norm(sample(parse("sin(x1)"), 0.0, grid64), NormSpec(0, math.inf)) == pytest.approx(1.0, abs=1e-15)

    def test_single_mode_2d(self, grid2d):
        u = sample(parse("sin(x1)*cos(2*x2)"), 0.0, grid2d)
        # integral of sin^2 * cos^2 over the torus is pi * pi
        assert norm(u, NormSpec(0, 2)) == pytest.approx(math.pi, rel=1e-10)

    def test_sobolev_single_mode(self, grid64):
        u = sample(parse("sin(3*x1)"), 0.0, grid64)
        assert norm(u, NormSpec(1, 2)) == pytest.approx(math.sqrt(math.pi * (1 + 9)), rel=1e-10)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
    @pytest.mark.parametrize("c", [-3.0, 0.5, 7.0])
    def test_homogeneity(self, grid64, random_field, spec, c):
        u = random_field(grid64)
        assert norm(c * u, spec) == pytest.approx(abs(c) * norm(u, spec), rel=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
    def test_triangle_inequality(self, grid2d, random_field, spec):
        for _ in range(5):
            u, v = random_field(grid2d), random_field(grid2d)
            assert norm(u + v, spec) <= norm(u, spec) + norm(v, spec) + 1e-12

    @pytest.mark.parametrize("p", [2, 4, math.inf])
    def test_monotone_in_sobolev_order(self, grid64, random_field, p):
        u = random_field(grid64)
        assert norm(u, NormSpec(1, p)) >= norm(u, NormSpec(0, p))

    @pytest.mark.parametrize("p", [1, 3, 2.5, -2])
    def test_rejects_bad_exponent(self, p):
        with pytest.raises(ConfigurationError):
            NormSpec(0, p)

    def test_label(self):
        assert NormSpec(0, math.inf).label == "m=0,p=inf"
        assert NormSpec(1, 4).label == "m=1,p=4"


def test_multi_indices_two_dimensions():
    assert multi_indices(2, 1) == [(0, 0), (0, 1), (1, 0)]
    assert len(multi_indices(2, 2)) == 6
