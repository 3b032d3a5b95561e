import math

import numpy as np
import pytest

from splitting.errors import ConfigurationError, TimeDependenceError
from splitting.expr import ZERO, parse
from splitting.extrapolate import combine, richardson_weights
from splitting.grid import NormSpec, make_grid, norm, sample
from splitting.problem import OperatorSpec, SplitProblem, strang_as_lie_split
from splitting.schemes import (
    CompositionTable,
    FreezePoint,
    SchemeSpec,
    compose_step,
    lie_step,
    run_scheme,
    strang_step,
    strang_table,
    td_frozen_step,
)
from splitting.substep import PropagatorConfig
from harness.registry import get_problem

L2 = NormSpec(0, 2)


def final_error(mp, spec, grid, cfg=None):
    run = run_scheme(mp.base, spec, grid, cfg)
    return norm(run.final - sample(mp.exact, mp.base.horizon_T, grid), L2)


def observed_order(errors):
    return math.log2(errors[0] / errors[1])


class TestCompositionTable:
    def test_sequence(self):
        table = CompositionTable(rows=((0.5, 0.5), (0.5, 0.5)), alternate=True)
        assert table.sequence() == [(0, 0.5), (1, 0.5), (1, 0.5), (0, 0.5)]

    def test_strang_table(self):
        assert strang_table(3).sequence() == [(0, 0.5), (1, 0.5), (2, 0.5), (2, 0.5), (1, 0.5), (0, 0.5)]

    def test_without_alternation(self):
        table = CompositionTable(rows=((1.0, 0.0), (0.0, 1.0)))
        assert table.sequence() == [(0, 1.0), (1, 0.0), (0, 0.0), (1, 1.0)]

    @pytest.mark.parametrize("rows", [((0.5, -0.1),), ((math.inf, 1.0),), ((math.nan, 1.0),), ((1.0,), (1.0, 0.0)), ()])
    def test_rejects(self, rows):
        with pytest.raises(ConfigurationError):
            CompositionTable(rows=rows)

    def test_column_mismatch(self, p1, grid32):
        table = CompositionTable(rows=((1.0, 0.0, 0.0),))
        with pytest.raises(ConfigurationError):
            compose_step(p1.base, sample(p1.base.u0, 0.0, grid32), 0.0, 0.1, table)


class TestFreezePoint:
    def test_right_all(self):
        fp = FreezePoint.right_all()
        assert fp.freeze_time(1, 0.0, 0.1) == 0.1
        assert fp.label == "right_all"

    def test_left_prefix(self):
        fp = FreezePoint.left_for_first_j(1)
        assert fp.freeze_time(1, 0.0, 0.1) == 0.0
        assert fp.freeze_time(2, 0.0, 0.1) == 0.1
        assert fp.label == "left_for_first_j(1)"

    @pytest.mark.parametrize("kwargs", [{"kind": "middle"}, {"kind": "left_for_first_j", "j": -1}, {"kind": "right_all", "j": 2}])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError):
            FreezePoint(**kwargs)


class TestSchemeSpec:
    def test_labels(self):
        assert SchemeSpec(kind="lie").label == "lie"
        assert SchemeSpec(kind="td_frozen", freeze_point=FreezePoint.left_for_first_j(1)).label == "td_frozen[left_for_first_j(1)]"

    def test_with_n(self):
        assert SchemeSpec(kind="strang").with_n(8).n == 8

    @pytest.mark.parametrize("kwargs", [{"kind": "lie", "n": 0}, {"kind": "composition"}, {"kind": "euler"}])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError):
            SchemeSpec(**kwargs)


class TestTrajectoryShape:
    def test_states(self, p1, grid32):
        run = run_scheme(p1.base, SchemeSpec(kind="lie", n=4), grid32)
        assert len(run) == 5 and run.n == 4
        np.testing.assert_array_equal(run[0].values, sample(p1.base.u0, 0.0, grid32).values)
        assert run.time_grid.node(4) == p1.base.horizon_T


class TestTimeDependence:
    @pytest.mark.parametrize("kind", ["lie", "strang"])
    def test_time_independent_schemes_refuse(self, kind, grid32):
        p2 = get_problem("p2_time_dependent")
        with pytest.raises(TimeDependenceError):
            run_scheme(p2.base, SchemeSpec(kind=kind, n=2), grid32)

    def test_step_refuses(self, grid32):
        p2 = get_problem("p2_time_dependent")
        u = sample(p2.base.u0, 0.0, grid32)
        with pytest.raises(TimeDependenceError):
            lie_step(p2.base, u, 0.0, 0.1)
        with pytest.raises(TimeDependenceError):
            compose_step(p2.base, u, 0.0, 0.1, strang_table(2))

    def test_operator_clocks(self, heat, grid32):
        # piece 2 only integrates cos(t) into the mean; its clock must cover [0, T] once
        p = SplitProblem(ops=(heat, OperatorSpec.build(1)), free_terms=(ZERO, parse("cos(t)")), u0=parse("0"), horizon_T=0.6)
        for kind in ("lie", "strang"):
            run = run_scheme(p, SchemeSpec(kind=kind, n=3), grid32)
            np.testing.assert_allclose(run.final.values, math.sin(0.6), atol=1e-12, err_msg=kind)


class TestExactness:
    @pytest.mark.parametrize("kind", ["lie", "strang", "td_subinterval", "td_frozen"])
    def test_commuting_pieces(self, kind, grid64):
        p = get_problem("commuting_heat")
        run = run_scheme(p, SchemeSpec(kind=kind, n=3), grid64)
        for i, state in enumerate(run):
            t = run.time_grid.node(i)
            x = grid64.coordinates[0]
            np.testing.assert_allclose(state.values, math.exp(-t) * np.sin(x) + 0.5 * math.exp(-4 * t) * np.cos(2 * x), atol=1e-13)

    def test_strang_is_palindromic_composition(self, p1, grid32):
        u = sample(p1.base.u0, 0.0, grid32)
        a = strang_step(p1.base, u, 0.1, 0.05)
        b = compose_step(p1.base, u, 0.1, 0.05, strang_table(2))
        np.testing.assert_array_equal(a.values, b.values)

    def test_strang_resplit_matches_strang(self, p1_unforced, grid64):
        strang = run_scheme(p1_unforced, SchemeSpec(kind="strang", n=16), grid64)
        resplit = run_scheme(strang_as_lie_split(p1_unforced), SchemeSpec(kind="lie", n=16), grid64)
        for a, b in zip(resplit, strang):
            np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-12 * np.max(np.abs(b.values)))

    @pytest.mark.parametrize(
        "spec",
        [SchemeSpec(kind="td_subinterval"), SchemeSpec(kind="td_frozen"), SchemeSpec(kind="td_frozen", freeze_point=FreezePoint.left_for_first_j(1))],
        ids=lambda s: s.label,
    )
    def test_time_dependent_variants_reduce_to_lie(self, spec, p1_unforced, grid64):
        lie = run_scheme(p1_unforced, SchemeSpec(kind="lie", n=8), grid64)
        variant = run_scheme(p1_unforced, spec.with_n(8), grid64)
        for a, b in zip(variant, lie):
            np.testing.assert_allclose(a.values, b.values, atol=1e-11)

    def test_zero_widths_skipped(self, p1, grid32):
        u = sample(p1.base.u0, 0.0, grid32)
        table = CompositionTable(rows=((1.0, 0.0), (0.0, 1.0)))
        np.testing.assert_array_equal(compose_step(p1.base, u, 0.0, 0.1, table).values, lie_step(p1.base, u, 0.0, 0.1).values)

    def test_td_frozen_default_is_right_all(self, grid32):
        p2 = get_problem("p2_time_dependent")
        u = sample(p2.base.u0, 0.0, grid32)
        a = td_frozen_step(p2.base, u, 0.0, 0.1)
        b = td_frozen_step(p2.base, u, 0.0, 0.1, freeze_point=FreezePoint.right_all())
        np.testing.assert_array_equal(a.values, b.values)


class TestConvergence:
    def test_lie_first_order(self, p1, grid32):
        errors = [final_error(p1, SchemeSpec(kind="lie", n=n), grid32) for n in (16, 32)]
        assert 0.8 <= observed_order(errors) <= 1.3

    def test_strang_second_order(self, p1, grid32):
        errors = [final_error(p1, SchemeSpec(kind="strang", n=n), grid32) for n in (8, 16)]
        assert 1.7 <= observed_order(errors) <= 2.3

    def test_lie_with_one_extrapolation(self, p1, grid32):
        def accelerated(n):
            runs = [run_scheme(p1.base, SchemeSpec(kind="lie", n=n * 2**j), grid32) for j in range(2)]
            v = combine(runs, richardson_weights(1))
            return norm(v.final - sample(p1.exact, p1.base.horizon_T, grid32), L2)

        assert observed_order([accelerated(8), accelerated(16)]) >= 1.7

    @pytest.mark.parametrize(
        "spec",
        [
            SchemeSpec(kind="td_subinterval"),
            SchemeSpec(kind="td_frozen"),
            SchemeSpec(kind="td_frozen", freeze_point=FreezePoint.left_for_first_j(1)),
        ],
        ids=lambda s: s.label,
    )
    def test_time_dependent_first_order(self, spec, grid32):
        p2 = get_problem("p2_time_dependent")
        cfg = PropagatorConfig(substep_tol=1e-10)
        errors = [final_error(p2, spec.with_n(n), grid32, cfg) for n in (16, 32)]
        assert 0.7 <= observed_order(errors) <= 1.4


class TestDeterminism:
    @pytest.mark.parametrize(
        "name, spec",
        [
            ("p1_heat_potential", SchemeSpec(kind="strang", n=4)),
            ("p2_time_dependent", SchemeSpec(kind="td_frozen", n=4)),
            ("degenerate_diffusion", SchemeSpec(kind="lie", n=2)),
        ],
    )
    def test_repeated_runs_are_bit_identical(self, name, spec):
        p = get_problem(name).base
        grid = make_grid(1, 16)
        cfg = PropagatorConfig(substep_tol=1e-8)
        first = run_scheme(p, spec, grid, cfg)
        second = run_scheme(p, spec, grid, cfg)
        for a, b in zip(first, second):
            assert np.array_equal(a.values, b.values)
