"""Outer loop, relaxation assembly, true-cost evaluation, and the
brute-force cross-check solver."""

import math

import numpy as np
import pytest

from ioaopt import ioa, scurve
from ioaopt.ioa import (
    LinRow, Problem, STerm, VarSpec, assemble_mod_sc, cutting_plane_solve,
    evaluate, gap_fraction, gap_percent, ioa_solve, make_states, oracle_solve,
)
from ioaopt.milp import ModelError, Status, solve_milp


def single_term_problem(curve, *, z_lo=None, z_hi=None, name="one"):
    lo = curve.lower if z_lo is None else z_lo
    hi = curve.upper if z_hi is None else z_hi
    return Problem(name, [VarSpec("z", lo, hi)], {}, [], [STerm("z", curve)])


class TestProblemValidation:
    def test_duplicate_variables(self, canonical_curve):
        prob = Problem("p", [VarSpec("z"), VarSpec("z")], {}, [], [])
        with pytest.raises(ModelError, match="duplicate"):
            prob.validate()

    def test_unknown_references(self, canonical_curve):
        with pytest.raises(ModelError, match="objective"):
            Problem("p", [VarSpec("z")], {"q": 1.0}, [], []).validate()
        with pytest.raises(ModelError, match="row"):
            Problem("p", [VarSpec("z")], {},
                    [LinRow({"q": 1.0}, "<=", 0.0)], []).validate()
        with pytest.raises(ModelError, match="unknown variable"):
            Problem("p", [VarSpec("z")], {}, [],
                    [STerm("q", canonical_curve)]).validate()

    def test_term_rules(self, canonical_curve):
        twice = [STerm("z", canonical_curve), STerm("z", canonical_curve)]
        with pytest.raises(ModelError, match="two cost terms"):
            Problem("p", [VarSpec("z")], {}, [], twice).validate()
        with pytest.raises(ModelError, match="switch"):
            Problem("p", [VarSpec("z")], {}, [],
                    [STerm("z", canonical_curve, switch="lam")]).validate()
        # switchable terms must be able to rest at zero cost
        with pytest.raises(ModelError, match="starting at 0"):
            Problem("p", [VarSpec("z"), VarSpec("lam", 0, 1)], {}, [],
                    [STerm("z", canonical_curve, switch="lam")]).validate()


class TestAssembly:
    def test_worked_example_shape(self, host_problem):
        states = make_states(host_problem, include_deflection=False,
                             n_apriori=2)
        model, handles = assemble_mod_sc(host_problem, states)
        # 2 host + 5 regime/cost (l0 l1 w p s) + 9 envelope = 16 variables
        # 3 host + 7 switching + 2 tangents + 10 envelope = 21 rows
        assert len(model.variables) == 16
        assert len(model.rows) == 21
        assert set(handles) == {"x1"}
        assert len(handles["x1"].block.mu) == 2

    def test_row_names(self, host_problem):
        states = make_states(host_problem, include_deflection=False,
                             n_apriori=2)
        model, _ = assemble_mod_sc(host_problem, states)
        names = {r.name for r in model.rows}
        for stem in ("pair", "reglo", "reghi", "wcap", "pcap", "plink"):
            assert f"{stem}_x1" in names
        assert {"cut_x1_0", "cut_x1_1"} <= names

    def test_first_relaxation_value(self, host_problem):
        states = make_states(host_problem, include_deflection=False,
                             n_apriori=2)
        model, _ = assemble_mod_sc(host_problem, states)
        res = solve_milp(model)
        assert res.status is Status.OPTIMAL
        # two-point envelope at 1.5 is 61 + 0.5*(125-61)/6 = 199/3,
        # so the relaxation bottoms out at 199/3 - 30*4.5 = -206/3
        assert res.objective == pytest.approx(-206.0 / 3.0, abs=1e-7)
        assert res.value(model, "x1") == pytest.approx(1.5, abs=1e-7)
        assert res.value(model, "x2") == pytest.approx(4.5, abs=1e-7)


class TestGolden:
    def test_global_optimum(self, host_problem):
        res = ioa_solve(host_problem, eps=1e-4)
        assert res.status is Status.OPTIMAL
        assert res.reason in ("gap", "fixed_point")
        assert res.objective == pytest.approx(-52.875, abs=1e-3)
        assert res.assignment["x1"] == pytest.approx(1.5, abs=1e-3)
        assert res.assignment["x2"] == pytest.approx(4.5, abs=1e-3)
        assert res.lb <= res.objective + 1e-9
        assert res.gap <= 1e-4 + 1e-12

    def test_bounds_move_one_way(self, host_problem):
        res = ioa_solve(host_problem, eps=1e-6)
        assert len(res.trace) >= 1
        for prev, row in zip(res.trace, res.trace[1:]):
            assert row.lb >= prev.lb - 1e-9
            assert row.ub_best <= prev.ub_best + 1e-9
            assert row.cuts >= prev.cuts
            assert row.milp_solves > prev.milp_solves
        for row in res.trace:
            assert row.gap_pct == pytest.approx(
                gap_percent(row.lb, row.ub_best), abs=1e-9)
            assert "x1" in row.candidates

    def test_oracle_agrees(self, host_problem):
        res = oracle_solve(host_problem, resolution=600)
        assert res.status is Status.OPTIMAL
        assert res.grid_slack < 0.5
        tol = max(1e-3 * 52.875, res.grid_slack)
        assert res.objective == pytest.approx(-52.875, abs=tol)
        assert res.assignment["x1"] == pytest.approx(1.5, abs=0.02)
        assert res.assignment["x2"] == pytest.approx(4.5, abs=0.02)


class TestInnerLoop:
    def test_affine_convex_half_needs_one_pass(self):
        curve = scurve.power_power(4.0, 0.5, 2.0, 1.0, capacity=10.0,
                                   deflection=5.0)
        prob = single_term_problem(curve, z_lo=7.0)
        states = make_states(prob)
        inner = cutting_plane_solve(prob, states, eps_inner=1e-9)
        assert inner.status is Status.OPTIMAL
        assert inner.iterations == 1
        assert inner.ub == pytest.approx(curve.eval(7.0), abs=1e-7)

    def test_curved_convex_half_adds_tangents(self, canonical_curve):
        prob = single_term_problem(canonical_curve, z_lo=6.0)
        states = make_states(prob, n_apriori=1)
        pool_before = len(states[0].pool)
        inner = cutting_plane_solve(prob, states, eps_inner=1e-7)
        assert inner.status is Status.OPTIMAL
        assert len(states[0].pool) > pool_before
        assert gap_fraction(inner.lb, inner.ub) <= 1e-7
        assert inner.ub == pytest.approx(canonical_curve.eval(6.0), abs=1e-5)


class TestPlainHostPath:
    def test_no_terms_is_one_milp(self):
        prob = Problem("lin", [VarSpec("x", 0.0, 10.0)], {"x": 1.0},
                       [LinRow({"x": 1.0}, ">=", 3.0)], [])
        res = ioa_solve(prob)
        assert res.status is Status.OPTIMAL
        assert res.reason == "gap"
        assert res.objective == pytest.approx(3.0)
        assert res.iterations == 0 and res.milp_solves == 1

    def test_infeasible_host(self, canonical_curve):
        prob = Problem(
            "bad", [VarSpec("z", 1.0, 7.0)], {},
            [LinRow({"z": 1.0}, ">=", 8.0)], [STerm("z", canonical_curve)])
        res = ioa_solve(prob)
        assert res.status is Status.INFEASIBLE
        assert res.reason == "infeasible"
        assert res.assignment is None
        assert math.isinf(res.ub)


class TestFixedPoint:
    def test_pole_sliver_certifies_what_it_can(self):
        # optimum pinned past the anchor ceiling: tangents cannot close
        # the gap there, so the sample set reaches a fixed point and the
        # solver must report honest, non-matching bounds
        curve = scurve.power_hyperbolic(
            40.0, 0.5, 200.0 * np.sqrt(50.0), capacity=100.0, deflection=50.0)
        prob = single_term_problem(curve, z_lo=99.9, z_hi=99.9)
        res = ioa_solve(prob, eps=1e-6, time_limit=120.0)
        assert res.status is Status.OPTIMAL
        assert res.reason == "fixed_point"
        assert res.objective == pytest.approx(curve.eval(99.9), rel=1e-9)
        assert res.lb < res.ub
        assert res.gap > 1e-6
        assert math.isfinite(res.lb)

    def test_time_limit_reports_partial_bounds(self, host_problem):
        res = ioa_solve(host_problem, eps=1e-9, time_limit=1e-9)
        assert res.status is Status.TIME_LIMIT
        assert res.reason == "time_limit"


class TestEvaluate:
    def test_worked_example_point(self, host_problem):
        val = evaluate(host_problem, {"x1": 1.5, "x2": 4.5})
        assert val == pytest.approx(-52.875, abs=1e-12)

    def test_switch_gates_the_cost(self):
        curve = scurve.power_power(4.0, 0.5, 2.0, 2.0, capacity=10.0,
                                   deflection=5.0)
        prob = Problem(
            "sw", [VarSpec("z", 0.0, 10.0), VarSpec("lam", 0.0, 1.0)],
            {"lam": 7.0}, [], [STerm("z", curve, switch="lam")])
        on = evaluate(prob, {"z": 4.0, "lam": 1.0})
        off = evaluate(prob, {"z": 4.0, "lam": 0.0})
        assert on == pytest.approx(7.0 + curve.eval(4.0))
        assert off == pytest.approx(0.0)

    def test_clamps_into_curve_domain(self, host_problem):
        crv = host_problem.sterms[0].curve
        high = evaluate(host_problem, {"x1": 7.2, "x2": 1.0})
        assert high == pytest.approx(crv.eval(7.0) - 30.0)


class TestGapArithmetic:
    def test_worked_example_gap(self):
        assert gap_fraction(-108.214, -52.875) == pytest.approx(0.5114, abs=1e-4)
        assert gap_percent(-108.214, -52.875) == pytest.approx(51.14, abs=0.01)

    def test_edge_cases(self):
        assert gap_fraction(5.0, 5.0) == 0.0
        assert gap_fraction(5.0, 4.0) == 0.0
        assert math.isinf(gap_fraction(0.0, 1.0))
        assert math.isinf(gap_fraction(-math.inf, 3.0))
        assert math.isinf(gap_fraction(1.0, math.nan))


class TestOracleSolver:
    def test_plain_host(self):
        prob = Problem("lin", [VarSpec("x", 0.0, 10.0)], {"x": 1.0},
                       [LinRow({"x": 1.0}, ">=", 3.0)], [])
        res = oracle_solve(prob)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(3.0)
        assert res.grid_slack == 0.0

    def test_infeasible(self, canonical_curve):
        prob = Problem(
            "bad", [VarSpec("z", 1.0, 7.0)], {},
            [LinRow({"z": 1.0}, ">=", 8.0)], [STerm("z", canonical_curve)])
        res = oracle_solve(prob, resolution=32)
        assert res.status is Status.INFEASIBLE

    def test_rejects_silly_resolution(self, host_problem):
        with pytest.raises(ValueError):
            oracle_solve(host_problem, resolution=0)

    def test_matches_exact_minimum_on_single_term(self, canonical_curve):
        prob = single_term_problem(canonical_curve)
        res = oracle_solve(prob, resolution=400)
        assert res.objective == pytest.approx(canonical_curve.eval(1.0),
                                              abs=max(res.grid_slack, 1e-6))
