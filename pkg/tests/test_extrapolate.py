import logging

import numpy as np
import pytest
import sympy

from splitting.errors import ConfigurationError, GridMismatchError
from splitting.extrapolate import (
    COND_WARNING,
    ExtrapolationWeights,
    combine,
    exact_weights,
    richardson_weights,
    strang_weights,
    vandermonde,
    weights,
)
from splitting.grid import GridFunction, make_grid
from splitting.trajectory import TimeGrid, Trajectory


def synthetic_run(grid, n, T, coefficients, limit=2.0, powers=(1, 2, 3, 4)):
    """u_n(t_i) = limit + sum_m c_m delta^p_m, the same at every node."""
    time_grid = TimeGrid(n=n, T=T)
    delta = time_grid.step
    value = limit + sum(c * delta**p for c, p in zip(coefficients, powers))
    return Trajectory.from_states(time_grid, [GridFunction.constant(grid, value)] * (n + 1))


class TestWeights:
    def test_known_general(self):
        assert richardson_weights(0).b == (1.0,)
        np.testing.assert_allclose(richardson_weights(1).b, [-1.0, 2.0], rtol=1e-14)
        np.testing.assert_allclose(richardson_weights(2).b, [1 / 3, -2.0, 8 / 3], rtol=1e-13)

    def test_known_strang(self):
        assert strang_weights(1).b == (1.0,)
        np.testing.assert_allclose(strang_weights(2).b, [-1 / 3, 4 / 3], rtol=1e-14)

    def test_exact_rationals(self):
        assert exact_weights(2) == (sympy.Rational(1, 3), sympy.Integer(-2), sympy.Rational(8, 3))
        assert exact_weights(2, "strang") == (sympy.Rational(-1, 3), sympy.Rational(4, 3))

    @pytest.mark.parametrize("variant, ks", [("general", range(0, 9)), ("strang", range(1, 9))])
    def test_float_matches_exact(self, variant, ks):
        for k in ks:
            exact = np.array([float(x) for x in exact_weights(k, variant)])
            got = np.array(weights(k, variant).b)
            assert np.max(np.abs(got - exact)) <= 1e-10, f"{variant} k={k}"

    @pytest.mark.parametrize("variant, ks", [("general", range(0, 9)), ("strang", range(1, 9))])
    def test_moment_conditions(self, variant, ks):
        for k in ks:
            w = weights(k, variant)
            residual = vandermonde(k, variant).T @ np.array(w.b)
            target = np.zeros(w.runs)
            target[0] = 1.0
            np.testing.assert_allclose(residual, target, atol=1e-10, err_msg=f"{variant} k={k}")

    def test_sizes(self):
        assert richardson_weights(3).runs == 4
        assert strang_weights(3).runs == 3
        assert vandermonde(3).shape == (4, 4)
        assert vandermonde(3, "strang").shape == (3, 3)

    def test_condition_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="splitting.extrapolate"):
            w = richardson_weights(8)
        assert w.cond > COND_WARNING
        assert "ill-conditioned" in caplog.text

    def test_no_warning_for_small_k(self, caplog):
        with caplog.at_level(logging.WARNING, logger="splitting.extrapolate"):
            richardson_weights(2)
        assert caplog.text == ""

    @pytest.mark.parametrize("k, variant", [(-1, "general"), (9, "general"), (0, "strang"), (9, "strang"), (1.5, "general"), (2, "foo")])
    def test_rejects(self, k, variant):
        with pytest.raises(ConfigurationError):
            weights(k, variant)


class TestCombine:
    def test_cancels_leading_terms(self, grid32):
        runs = [synthetic_run(grid32, 4 * 2**j, 1.0, [0.7, -0.3]) for j in range(3)]
        v = combine(runs, richardson_weights(2))
        assert v.n == 4
        for state in v:
            np.testing.assert_allclose(state.values, 2.0, atol=1e-13)

    def test_strang_variant_cancels_second_order(self, grid32):
        runs = [synthetic_run(grid32, 8 * 2**j, 1.0, [0.9], powers=(2,)) for j in range(2)]
        v = combine(runs, strang_weights(2))
        np.testing.assert_allclose(v.final.values, 2.0, atol=1e-14)

    def test_uses_shared_nodes(self, grid32):
        coarse = Trajectory.from_states(TimeGrid(2, 1.0), [GridFunction.constant(grid32, float(i)) for i in range(3)])
        fine = Trajectory.from_states(TimeGrid(4, 1.0), [GridFunction.constant(grid32, 10.0 * i) for i in range(5)])
        v = combine([coarse, fine], richardson_weights(1))
        # node i of the fine run at 2i holds 20 i
        for i, state in enumerate(v):
            np.testing.assert_allclose(state.values, -1.0 * i + 2.0 * 20.0 * i)

    def test_identity_weights_return_base(self, grid32):
        run = synthetic_run(grid32, 4, 1.0, [1.0])
        assert combine([run], richardson_weights(0)) is run

    def test_count_mismatch(self, grid32):
        runs = [synthetic_run(grid32, 4, 1.0, [1.0])]
        with pytest.raises(ConfigurationError):
            combine(runs, richardson_weights(1))

    def test_step_count_mismatch(self, grid32):
        runs = [synthetic_run(grid32, 4, 1.0, [1.0]), synthetic_run(grid32, 6, 1.0, [1.0])]
        with pytest.raises(GridMismatchError):
            combine(runs, richardson_weights(1))

    def test_horizon_mismatch(self, grid32):
        runs = [synthetic_run(grid32, 4, 1.0, [1.0]), synthetic_run(grid32, 8, 2.0, [1.0])]
        with pytest.raises(GridMismatchError):
            combine(runs, richardson_weights(1))

    def test_spatial_grid_mismatch(self, grid32):
        runs = [synthetic_run(grid32, 4, 1.0, [1.0]), synthetic_run(make_grid(1, 16), 8, 1.0, [1.0])]
        with pytest.raises(GridMismatchError):
            combine(runs, richardson_weights(1))

    def test_custom_weights(self, grid32):
        runs = [synthetic_run(grid32, 2, 1.0, [0.0]), synthetic_run(grid32, 4, 1.0, [0.0])]
        w = ExtrapolationWeights(k=1, b=(0.5, 0.5), variant="general", cond=1.0)
        np.testing.assert_allclose(combine(runs, w).final.values, 2.0)

    @pytest.mark.parametrize("slot", [0, 1, 2])
    def test_linear_in_each_run(self, grid32, rng, slot):
        def random_run(n):
            time_grid = TimeGrid(n=n, T=1.0)
            return Trajectory.from_states(time_grid, [GridFunction(grid32, rng.normal(size=32)) for _ in range(n + 1)])

        def scaled_sum(a, x, b, y):
            states = [xs * a + ys * b for xs, ys in zip(x, y)]
            return Trajectory.from_states(x.time_grid, states)

        w = richardson_weights(2)
        runs = [random_run(4 * 2**j) for j in range(3)]
        other = random_run(4 * 2**slot)
        # alpha + beta = 1, so the runs held fixed carry through unchanged
        alpha, beta = 1.25, -0.25
        mixed = list(runs)
        mixed[slot] = scaled_sum(alpha, runs[slot], beta, other)
        swapped = list(runs)
        swapped[slot] = other
        lhs = combine(mixed, w)
        base = combine(runs, w)
        alt = combine(swapped, w)
        for i in range(lhs.n + 1):
            expected = base[i] * alpha + alt[i] * beta
            np.testing.assert_allclose(lhs[i].values, expected.values, atol=1e-12)
