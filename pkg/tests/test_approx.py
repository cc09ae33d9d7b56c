"""Envelope sets, the KKT embedding, and tangent cut machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioaopt import approx, scurve
from ioaopt.approx import (
    ApproxSet, Cut, CutPool, DegenerateDomain, SLOPE_CAP,
    anchor_ceiling, apriori_cuts, emit_kkt, init_set, inner_value, tangent_cut,
)
from ioaopt.milp import MilpModel, Status, VarKind, solve_milp


def steep_hyperbolic():
    # slope at the pole margin is ~1e12, far past the anchor ceiling
    return scurve.split(scurve.power_hyperbolic(
        40.0, 0.5, 200.0 * np.sqrt(50.0), capacity=100.0, deflection=50.0))


class TestApproxSet:
    def test_seed_sets(self, canonical_pair):
        assert init_set(canonical_pair).points == [1.0, 5.0, 7.0]
        assert init_set(canonical_pair, include_deflection=False).points == [1.0, 7.0]
        aset = init_set(canonical_pair, extra=2, include_deflection=False)
        assert aset.points == [1.0, 3.0, 5.0, 7.0]

    def test_values_follow_cap(self, canonical_pair):
        aset = init_set(canonical_pair)
        assert aset.values == [61.0, 125.0, 125.0]

    def test_add_and_duplicates(self, canonical_pair):
        aset = init_set(canonical_pair, include_deflection=False)
        assert aset.add(4.0) is True
        assert len(aset) == 3
        assert aset.add(4.0) is False
        assert aset.is_duplicate(4.0)
        assert not aset.is_duplicate(2.0)

    def test_add_outside_domain(self, canonical_pair):
        aset = init_set(canonical_pair)
        with pytest.raises(ValueError, match="outside domain"):
            aset.add(7.5)

    def test_needs_two_distinct_points(self, canonical_pair):
        with pytest.raises(DegenerateDomain):
            ApproxSet(canonical_pair, [3.0, 3.0])


class TestInnerValue:
    def test_frozen_two_point_envelope(self, canonical_pair):
        aset = init_set(canonical_pair, include_deflection=False)
        assert inner_value(aset, 4.0) == pytest.approx(93.0, abs=1e-9)

    def test_frozen_three_point_envelope(self, canonical_pair):
        aset = init_set(canonical_pair)
        assert inner_value(aset, 6.0) == pytest.approx(125.0, abs=1e-9)

    def test_exact_at_sample_points(self, canonical_pair):
        aset = init_set(canonical_pair)
        for q, v in zip(aset.points, aset.values):
            assert inner_value(aset, q) == v

    def test_outside_range_rejected(self, canonical_pair):
        aset = init_set(canonical_pair)
        with pytest.raises(ValueError, match="outside the sampled range"):
            inner_value(aset, 0.5)

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.floats(1.0, 7.0), min_size=0, max_size=6),
           st.floats(1.0, 7.0))
    def test_envelope_never_exceeds_cap(self, canonical_pair, extra, z):
        aset = init_set(canonical_pair)
        for q in extra:
            aset.add(q)
        assert inner_value(aset, z) <= canonical_pair.cap(z) + 1e-8

    @settings(max_examples=150, deadline=None)
    @given(st.floats(1.0, 7.0), st.floats(1.0, 7.0))
    def test_refinement_is_monotone(self, canonical_pair, new_point, z):
        aset = init_set(canonical_pair)
        before = inner_value(aset, z)
        aset.add(new_point)
        assert inner_value(aset, z) >= before - 1e-9


class TestKktEmbedding:
    def host(self, z_fixed=None, l0_fixed=None):
        model = MilpModel("host")
        z = 4.0 if z_fixed is None else z_fixed
        model.add_var("z", z, z) if z_fixed is not None else \
            model.add_var("z", 1.0, 7.0)
        model.add_var("l0", l0_fixed if l0_fixed is not None else 0,
                      l0_fixed if l0_fixed is not None else 1,
                      kind=VarKind.BINARY)
        model.add_var("w", 0.0, 500.0, obj=1.0)
        return model

    def test_block_shape(self, canonical_pair):
        model = self.host(z_fixed=4.0, l0_fixed=1)
        nv, nr = len(model.variables), len(model.rows)
        aset = init_set(canonical_pair, include_deflection=False)
        blk = emit_kkt(model, aset, z="z", l0="l0", w="w", m0=canonical_pair.m0,
                       tag="t")
        # tau = 2 points: 3 tau + 3 variables, 3 tau + 4 rows
        assert len(model.variables) - nv == 9
        assert len(model.rows) - nr == 10
        assert len(blk.mu) == len(blk.gamma) == len(blk.u) == 2
        assert blk.bigm == pytest.approx(352.0)

    def test_pricing_matches_envelope(self, canonical_pair):
        model = self.host(z_fixed=4.0, l0_fixed=1)
        aset = init_set(canonical_pair, include_deflection=False)
        emit_kkt(model, aset, z="z", l0="l0", w="w", m0=canonical_pair.m0,
                 tag="t")
        res = solve_milp(model)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(93.0, abs=1e-6)
        assert res.value(model, "zeta_t") == pytest.approx(93.0, abs=1e-6)

    def test_pricing_at_sample_point(self, canonical_pair):
        model = self.host(z_fixed=5.0, l0_fixed=1)
        aset = init_set(canonical_pair)
        emit_kkt(model, aset, z="z", l0="l0", w="w", m0=canonical_pair.m0,
                 tag="t")
        res = solve_milp(model)
        assert res.objective == pytest.approx(125.0, abs=1e-6)

    def test_switched_off_costs_nothing(self, canonical_pair):
        model = self.host(z_fixed=4.0, l0_fixed=0)
        aset = init_set(canonical_pair)
        emit_kkt(model, aset, z="z", l0="l0", w="w", m0=canonical_pair.m0,
                 tag="t")
        res = solve_milp(model)
        assert res.status is Status.OPTIMAL
        assert res.objective == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("z", [1.0, 2.5, 4.75, 5.0, 6.3, 7.0])
    def test_pricing_sweep(self, canonical_pair, z):
        model = self.host(z_fixed=z, l0_fixed=1)
        aset = init_set(canonical_pair, extra=1)
        emit_kkt(model, aset, z="z", l0="l0", w="w", m0=canonical_pair.m0,
                 tag="t")
        res = solve_milp(model)
        assert res.objective == pytest.approx(inner_value(aset, z), abs=1e-6)


class TestTangentCuts:
    def test_frozen_tangent(self, canonical_pair):
        cut = tangent_cut(canonical_pair, 6.0)
        assert cut.value == pytest.approx(126.0, abs=1e-9)
        assert cut.slope == pytest.approx(3.0, abs=1e-9)
        assert cut.at(6.0) == pytest.approx(126.0)

    def test_cut_underestimates_everywhere(self, canonical_pair):
        cut = tangent_cut(canonical_pair, 6.0)
        for z in np.linspace(1.0, 7.0, 41):
            assert cut.at(z) <= canonical_pair.cup(z) + 1e-8

    def test_anchor_outside_domain(self, canonical_pair):
        with pytest.raises(ValueError, match="cut anchor"):
            tangent_cut(canonical_pair, 7.5)

    def test_apriori_anchors(self, canonical_pair):
        pool = apriori_cuts(canonical_pair, 2)
        assert [c.anchor for c in pool] == [5.0, 7.0]
        assert len(apriori_cuts(canonical_pair, 5)) == 5
        with pytest.raises(ValueError):
            apriori_cuts(canonical_pair, 0)

    def test_pool_dedup(self, canonical_pair):
        pool = CutPool(canonical_pair)
        assert pool.add_anchor(6.0) is True
        assert pool.add_anchor(6.0) is False
        assert pool.add(Cut(6.0, 126.0, 3.0)) is False
        assert len(pool) == 1

    @settings(max_examples=150, deadline=None)
    @given(st.floats(5.0, 7.0), st.floats(1.0, 7.0))
    def test_cuts_stay_below_cup(self, canonical_pair, anchor, z):
        cut = tangent_cut(canonical_pair, anchor)
        assert cut.at(z) <= canonical_pair.cup(z) + 1e-8


class TestAnchorCeiling:
    def test_smooth_curve_keeps_full_range(self, canonical_pair):
        assert anchor_ceiling(canonical_pair) == canonical_pair.curve.effective_upper

    def test_pole_pulls_anchor_back(self):
        pair = steep_hyperbolic()
        ceil = anchor_ceiling(pair)
        assert pair.curve.deflection < ceil < pair.curve.effective_upper
        assert pair.cup_slope(ceil) <= SLOPE_CAP

    def test_tangent_anchor_is_clamped(self):
        pair = steep_hyperbolic()
        cut = tangent_cut(pair, pair.curve.effective_upper)
        assert cut.slope <= SLOPE_CAP
        assert cut.anchor == pytest.approx(anchor_ceiling(pair))

    def test_apriori_respects_ceiling(self):
        pair = steep_hyperbolic()
        for cut in apriori_cuts(pair, 5):
            assert cut.slope <= SLOPE_CAP

    def test_clamped_cut_still_underestimates(self):
        pair = steep_hyperbolic()
        cut = tangent_cut(pair, pair.curve.effective_upper)
        for z in np.linspace(pair.curve.lower, pair.curve.effective_upper, 41):
            assert cut.at(z) <= pair.cup(z) + 1e-8
