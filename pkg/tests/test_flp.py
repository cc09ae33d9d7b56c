"""Facility-location data model, formulation, and solution auditing."""

import math

import numpy as np
import pytest

from ioaopt import flp, ioa
from ioaopt.flp import (
    Facility, FlpInstance, InfeasibleAssignment, build_problem,
    production_curve, summarize,
)
from ioaopt.milp import Status, VarKind


def solved_toy(toy_instance, **weights):
    problem = build_problem(toy_instance, **weights)
    res = ioa.ioa_solve(problem, eps=1e-3)
    assert res.status is Status.OPTIMAL
    return problem, res


class TestProductionCurves:
    def test_family_one_closed_form(self):
        crv = production_curve(1, 1, 100.0, 50.0)
        assert crv.eval(50.0) == pytest.approx(40.0 * math.sqrt(50.0))
        assert crv.eval(100.0) == pytest.approx(40.0 * math.sqrt(50.0) + 0.5 * 50.0**2)
        heavy = production_curve(1, 3, 100.0, 50.0)
        assert heavy.eval(50.0) == pytest.approx(400.0 * math.sqrt(50.0))
        assert heavy.eval(100.0) == pytest.approx(400.0 * math.sqrt(50.0) + 5.0 * 50.0**2)

    def test_family_two_has_a_pole(self):
        crv = production_curve(2, 1, 100.0, 50.0)
        assert crv.eval(50.0) == pytest.approx(40.0 * math.sqrt(50.0))
        assert crv.eval(75.0) == pytest.approx(
            40.0 * math.sqrt(50.0) + 20.0 * math.sqrt(50.0))
        assert crv.eval(crv.effective_upper) > 1e5

    def test_family_three_starts_at_zero(self):
        crv = production_curve(3, 1, 100.0, 50.0)
        assert crv.eval(0.0) == pytest.approx(0.0, abs=1e-12)
        assert crv.eval(50.0) == pytest.approx(12.5)
        heavy = production_curve(3, 3, 100.0, 50.0)
        assert heavy.eval(50.0) == pytest.approx(125.0)

    def test_structures_two_and_four_reuse_base_curve(self):
        base = production_curve(1, 1, 100.0, 50.0)
        for structure in (2, 4):
            other = production_curve(1, structure, 100.0, 50.0)
            for z in (10.0, 50.0, 90.0):
                assert other.eval(z) == base.eval(z)

    def test_bad_catalog_keys(self):
        with pytest.raises(ValueError, match="structure"):
            production_curve(1, 5, 100.0, 50.0)
        with pytest.raises(ValueError, match="function type"):
            production_curve(4, 1, 100.0, 50.0)


class TestInstanceValidation:
    def test_transport_shape(self, toy_instance):
        toy_instance.transport = np.ones((3, 2))
        with pytest.raises(ValueError, match="transport matrix"):
            toy_instance.validate()

    def test_negative_data(self, toy_instance):
        toy_instance.demands = np.array([-1.0, 10.0])
        with pytest.raises(ValueError, match="nonnegative"):
            toy_instance.validate()

    def test_capacity_must_cover_demand(self, toy_instance):
        toy_instance.demands = np.array([300.0, 300.0])
        with pytest.raises(ValueError, match="cannot cover"):
            toy_instance.validate()

    def test_curve_must_match_capacity(self, toy_instance):
        crv = production_curve(1, 1, 150.0, 75.0)
        toy_instance.facilities[0] = Facility(300.0, 200.0, 100.0, crv)
        with pytest.raises(ValueError, match="tops out"):
            toy_instance.validate()


class TestBuildProblem:
    def test_shape(self, toy_instance):
        problem = build_problem(toy_instance)
        # 4 flows + 2 production levels + 2 open indicators
        assert len(problem.variables) == 8
        assert len(problem.constraints) == 4
        assert len(problem.sterms) == 2
        names = {r.name for r in problem.constraints}
        assert names == {"demand_0", "demand_1", "prod_0", "prod_1"}
        assert all(t.switch == f"lam_{j}" for j, t in enumerate(problem.sterms))

    def test_assembled_relaxation_has_regime_flags(self, toy_instance):
        problem = build_problem(toy_instance)
        states = ioa.make_states(problem)
        model, _ = ioa.assemble_mod_sc(problem, states)
        flags = [v.name for v in model.variables
                 if v.kind is VarKind.BINARY and v.name.startswith(("l0_", "l1_"))]
        assert sorted(flags) == ["l0_z_0", "l0_z_1", "l1_z_0", "l1_z_1"]

    def test_objective_coefficients(self, toy_instance):
        problem = build_problem(toy_instance, alpha=2.0)
        assert problem.objective["lam_0"] == 300.0
        assert problem.objective["lam_1"] == 500.0
        assert problem.objective["x_0_0"] == pytest.approx(2.0 * 1.0)
        assert problem.objective["x_1_1"] == pytest.approx(2.0 * 0.5)

    def test_theta_scales_production(self, toy_instance):
        base = build_problem(toy_instance).sterms[0].curve
        scaled = build_problem(toy_instance, theta=3.0).sterms[0].curve
        for z in (20.0, 100.0, 180.0):
            assert scaled.eval(z) == pytest.approx(3.0 * base.eval(z))

    def test_beta_moves_deflection(self, toy_instance):
        problem = build_problem(toy_instance, beta=0.25)
        crv = problem.sterms[0].curve
        assert crv.deflection == pytest.approx(50.0)
        assert crv.upper == pytest.approx(200.0)

    def test_beta_matching_data_needs_no_metadata(self, toy_instance):
        toy_instance.ftype = None
        problem = build_problem(toy_instance, beta=0.5)
        assert problem.sterms[0].curve.deflection == pytest.approx(100.0)

    def test_beta_rebuild_needs_metadata(self, toy_instance):
        toy_instance.ftype = None
        with pytest.raises(ValueError, match="metadata"):
            build_problem(toy_instance, beta=0.25)

    def test_weight_validation(self, toy_instance):
        with pytest.raises(ValueError, match="positive"):
            build_problem(toy_instance, alpha=0.0)
        with pytest.raises(ValueError, match="positive"):
            build_problem(toy_instance, theta=-1.0)
        with pytest.raises(ValueError, match="beta"):
            build_problem(toy_instance, beta=1.5)


class TestSolveAndSummarize:
    def test_toy_solution(self, toy_instance):
        problem, res = solved_toy(toy_instance)
        sol = summarize(toy_instance, problem, res.assignment, res.objective)
        assert sol.n_T == sol.n_e + sol.n_d
        assert sol.open_flags.sum() >= 1
        assert sol.flows.shape == (2, 2)
        assert sol.production.shape == (2,)
        assert sol.objective == pytest.approx(res.objective, rel=1e-6)
        # open facilities carry one regime flag each, closed ones none
        assert sol.n_T == sol.open_flags.sum()

    def test_zero_demand_opens_nothing(self, toy_instance):
        toy_instance.demands = np.array([0.0, 0.0])
        problem, res = solved_toy(toy_instance)
        assert res.objective == pytest.approx(0.0, abs=1e-7)
        sol = summarize(toy_instance, problem, res.assignment, res.objective)
        assert sol.n_e == sol.n_d == sol.n_T == 0
        assert sol.open_flags.sum() == 0

    def test_demand_above_deflection_forces_high_regime(self):
        crv = production_curve(1, 1, 100.0, 50.0)
        inst = FlpInstance(
            name="one", facilities=[Facility(10.0, 100.0, 50.0, crv)],
            demands=np.array([60.0]), transport=np.array([[0.1]]),
            ftype=1, structure=1, beta=0.5)
        problem = build_problem(inst)
        res = ioa.ioa_solve(problem, eps=1e-3)
        assert res.status is Status.OPTIMAL
        sol = summarize(inst, problem, res.assignment, res.objective)
        assert (sol.n_e, sol.n_d) == (0, 1)
        assert sol.production[0] == pytest.approx(60.0, abs=1e-6)


class TestAssignmentAudit:
    def assignment(self, toy_instance):
        problem, res = solved_toy(toy_instance)
        return toy_instance, problem, dict(res.assignment), res.objective

    def test_missing_variable(self, toy_instance):
        inst, problem, asg, _ = self.assignment(toy_instance)
        del asg["z_0"]
        with pytest.raises(InfeasibleAssignment, match="missing variable"):
            summarize(inst, problem, asg)

    def test_demand_row_named(self, toy_instance):
        inst, problem, asg, _ = self.assignment(toy_instance)
        asg["x_0_0"] = 0.0
        asg["x_0_1"] = 0.0
        with pytest.raises(InfeasibleAssignment, match="demand_0"):
            summarize(inst, problem, asg)

    def test_production_row_named(self, toy_instance):
        inst, problem, asg, _ = self.assignment(toy_instance)
        open_j = 0 if asg["lam_0"] > 0.5 else 1
        asg[f"z_{open_j}"] = 0.0
        with pytest.raises(InfeasibleAssignment, match=f"prod_{open_j}"):
            summarize(inst, problem, asg)

    def test_fractional_flag_rejected(self, toy_instance):
        inst, problem, asg, _ = self.assignment(toy_instance)
        asg["l0_z_0"] = 0.4
        with pytest.raises(InfeasibleAssignment, match="binary"):
            summarize(inst, problem, asg)

    def test_flags_must_sum_to_lambda(self, toy_instance):
        inst, problem, asg, _ = self.assignment(toy_instance)
        open_j = 0 if asg["lam_0"] > 0.5 else 1
        asg[f"l0_z_{open_j}"] = 1.0
        asg[f"l1_z_{open_j}"] = 1.0
        with pytest.raises(InfeasibleAssignment, match=f"pair_z_{open_j}"):
            summarize(inst, problem, asg)

    def test_regime_window_checked(self):
        crv = production_curve(1, 1, 100.0, 50.0)
        inst = FlpInstance(
            name="one", facilities=[Facility(10.0, 100.0, 50.0, crv)],
            demands=np.array([5.0]), transport=np.array([[0.1]]),
            ftype=1, structure=1, beta=0.5)
        problem = build_problem(inst)
        # claim the high regime while producing under the deflection point
        asg = {"x_0_0": 5.0, "z_0": 5.0, "lam_0": 1.0,
               "l0_z_0": 0.0, "l1_z_0": 1.0}
        with pytest.raises(InfeasibleAssignment, match="reglo_z_0"):
            summarize(inst, problem, asg)
        # and the converse: low regime flag with production past capacity gate
        asg = {"x_0_0": 5.0, "z_0": 80.0, "lam_0": 1.0,
               "l0_z_0": 1.0, "l1_z_0": 0.0}
        with pytest.raises(InfeasibleAssignment, match="reghi_z_0"):
            summarize(inst, problem, asg)

    def test_objective_drift_rejected(self, toy_instance):
        inst, problem, asg, obj = self.assignment(toy_instance)
        with pytest.raises(InfeasibleAssignment, match="drifts"):
            summarize(inst, problem, asg, solver_objective=obj + 50.0)

    def test_boundary_production_accepts_either_regime(self, toy_instance):
        crv = production_curve(1, 1, 100.0, 50.0)
        inst = FlpInstance(
            name="edge", facilities=[Facility(10.0, 100.0, 50.0, crv)],
            demands=np.array([50.0]), transport=np.array([[0.1]]),
            ftype=1, structure=1, beta=0.5)
        problem = build_problem(inst)
        asg = {"x_0_0": 50.0, "z_0": 50.0, "lam_0": 1.0}
        for lo, hi in ((1.0, 0.0), (0.0, 1.0)):
            asg["l0_z_0"], asg["l1_z_0"] = lo, hi
            sol = summarize(inst, problem, asg)
            assert sol.n_T == 1
            assert sol.objective == pytest.approx(0.1 * 50.0 + 10.0 + crv.eval(50.0))
