import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioaopt import scurve
from ioaopt.scurve import (
    CurveValidationError, bigm_gamma, cubic, custom, from_params,
    power_hyperbolic, power_power, scale, split, to_params,
)


class TestCanonicalCubic:
    def test_frozen_values(self, canonical_curve):
        assert canonical_curve.eval(1.0) == 61.0
        assert canonical_curve.eval(5.0) == 125.0
        assert canonical_curve.eval(7.0) == 133.0
        assert canonical_curve.eval(6.0) == 126.0

    def test_effective_upper_is_capacity_for_cubic(self, canonical_curve):
        assert canonical_curve.effective_upper == 7.0

    def test_split_constants(self, canonical_pair):
        assert canonical_pair.m0 == 125.0
        assert canonical_pair.m1 == 133.0

    def test_cap_flat_above_deflection(self, canonical_pair):
        # dleft = 3a(z0-z0)^2 = 0, so the cap extends flat at phi(z0)
        assert canonical_pair.cap(6.0) == 125.0
        assert canonical_pair.cap(7.0) == 125.0

    def test_cup_line_below_deflection(self, canonical_pair):
        # dright = 0 as well: the cup is flat at 125 below the deflection
        assert canonical_pair.cup(1.0) == 125.0
        assert canonical_pair.cup(6.0) == 126.0

    def test_bigm_gamma(self, canonical_pair):
        # steepest cap slope is 48 at z=1: 48*6 + (125-61) = 352
        assert bigm_gamma(canonical_pair) == pytest.approx(352.0, abs=1e-6)


class TestConstructors:
    def test_power_power_matches_closed_form(self):
        c = power_power(alpha1=40.0, beta1=0.5, alpha2=0.5, beta2=2.0,
                        capacity=100.0, deflection=50.0)
        assert c.eval(25.0) == pytest.approx(40.0 * 5.0)
        assert c.eval(50.0) == pytest.approx(40.0 * math.sqrt(50.0))
        assert c.eval(80.0) == pytest.approx(40.0 * math.sqrt(50.0) + 0.5 * 900.0)

    def test_power_hyperbolic_pole(self):
        c = power_hyperbolic(alpha1=40.0, beta1=0.5, alpha2=20.0 * math.sqrt(50.0),
                             capacity=100.0, deflection=50.0)
        assert c.effective_upper < c.upper
        assert math.isfinite(c.eval(c.effective_upper))
        # value explodes toward the pole but stays monotone
        assert c.eval(c.effective_upper) > c.eval(99.0) > c.eval(60.0)

    def test_cubic_rejects_nonpositive_a(self):
        with pytest.raises(CurveValidationError):
            cubic(a=0.0, eps=0.0, const=1.0, capacity=10.0, deflection=5.0)

    def test_power_power_rejects_bad_exponents(self):
        with pytest.raises(CurveValidationError):
            power_power(alpha1=1.0, beta1=1.5, alpha2=1.0, beta2=2.0,
                        capacity=10.0, deflection=5.0)
        with pytest.raises(CurveValidationError):
            power_power(alpha1=1.0, beta1=0.5, alpha2=1.0, beta2=0.5,
                        capacity=10.0, deflection=5.0)

    def test_deflection_outside_domain_rejected(self):
        with pytest.raises(CurveValidationError):
            cubic(a=1.0, eps=0.0, const=0.0, capacity=7.0, deflection=9.0)

    def test_decreasing_custom_curve_rejected(self):
        with pytest.raises(CurveValidationError):
            custom(lambda z: -z, lower=0.0, upper=1.0, deflection=0.5,
                   dleft=-1.0, dright=-1.0)

    def test_wrong_curvature_order_rejected(self):
        # convex-then-concave is the mirror image and must not validate
        with pytest.raises(CurveValidationError):
            custom(lambda z: (z - 5.0) ** 2, lower=0.0, upper=10.0,
                   deflection=5.0)


class TestEvalDomain:
    def test_eval_clamps_float_dust(self, canonical_curve):
        assert canonical_curve.eval(7.0 + 1e-12) == 133.0

    def test_eval_rejects_far_outside(self, canonical_curve):
        with pytest.raises(ValueError):
            canonical_curve.eval(8.0)
        with pytest.raises(ValueError):
            canonical_curve.eval(0.0)


class TestScale:
    def test_scale_multiplies_values(self, canonical_curve):
        doubled = scale(canonical_curve, 2.0)
        for z in (1.0, 3.3, 5.0, 6.5, 7.0):
            assert doubled.eval(z) == pytest.approx(2.0 * canonical_curve.eval(z))

    def test_scale_multiplies_split_constants(self, canonical_curve):
        pair = split(scale(canonical_curve, 3.0))
        assert pair.m0 == pytest.approx(375.0)
        assert pair.m1 == pytest.approx(399.0)

    def test_scale_rejects_nonpositive(self, canonical_curve):
        with pytest.raises(CurveValidationError):
            scale(canonical_curve, 0.0)


class TestSerialization:
    @pytest.mark.parametrize("curve", [
        cubic(a=1.0, eps=0.5, const=125.0, capacity=7.0, deflection=5.0, lower=1.0),
        power_power(alpha1=40.0, beta1=0.5, alpha2=0.5, beta2=2.0,
                    capacity=100.0, deflection=50.0),
        power_hyperbolic(alpha1=40.0, beta1=0.5, alpha2=140.0,
                         capacity=100.0, deflection=50.0),
    ])
    def test_round_trip(self, curve):
        back = from_params(to_params(curve))
        assert back.kind == curve.kind
        for z in np.linspace(curve.lower, curve.effective_upper, 17):
            assert back.eval(float(z)) == pytest.approx(curve.eval(float(z)))

    def test_custom_refuses_serialization(self):
        c = custom(lambda z: math.sqrt(z + 1.0), lower=0.0, upper=4.0,
                   deflection=4.0, dleft=0.5, dright=0.5)
        with pytest.raises(CurveValidationError):
            to_params(c)

    def test_from_params_unknown_kind(self):
        with pytest.raises(CurveValidationError):
            from_params({"kind": "spline", "lower": 0, "upper": 1, "deflection": 0.5})


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(0.001, 0.5),
    z0_frac=st.floats(0.2, 0.8),
    cap=st.floats(4.0, 50.0),
    z_frac=st.floats(0.0, 1.0),
)
def test_split_recombines_in_active_regime(a, z0_frac, cap, z_frac):
    """phi equals the cap below the deflection and the cup above it."""
    z0 = z0_frac * cap
    curve = cubic(a=a, eps=0.0, const=a * z0**3, capacity=cap, deflection=z0)
    pair = split(curve)
    z = z_frac * cap
    if z <= z0:
        assert pair.cap(z) == pytest.approx(curve.eval(z), abs=1e-9)
    else:
        assert pair.cup(z) == pytest.approx(curve.eval(z), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(z=st.floats(1.0, 7.0), w=st.floats(1.0, 7.0))
def test_cap_concave_cup_convex_midpoint(canonical_pair, z, w):
    mid = 0.5 * (z + w)
    cap_mid = canonical_pair.cap(mid)
    cup_mid = canonical_pair.cup(mid)
    assert cap_mid >= 0.5 * (canonical_pair.cap(z) + canonical_pair.cap(w)) - 1e-8
    assert cup_mid <= 0.5 * (canonical_pair.cup(z) + canonical_pair.cup(w)) + 1e-8
