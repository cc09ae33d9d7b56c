"""Inverse-S-shaped cost curves and their concave/convex split.

A curve phi is concave on [lower, deflection] and convex on [deflection,
upper], continuous and nondecreasing throughout, with possibly distinct
one-sided derivatives at the deflection point.  ``split`` produces the
cap/cup decomposition: the cap equals phi below the deflection and extends
it with the left tangent above; the cup equals phi above the deflection
and extends it with the right tangent below.  On each regime the active
half reproduces phi exactly, which is what the solver relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

VALIDATION_SAMPLES = 257
REL_TOL = 1e-8
FD_STEP_FACTOR = 1e-6
POLE_MARGIN = 1e-6


class CurveValidationError(ValueError):
    """Raised when a candidate curve violates the inverse-S contract."""


class CurveKind(str, Enum):
    POWER_POWER = "power_power"
    POWER_HYPERBOLIC = "power_hyperbolic"
    CUBIC = "cubic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SCurve:
    """A validated inverse-S-shaped cost function on [lower, upper]."""

    kind: CurveKind
    lower: float
    upper: float
    deflection: float
    dleft: float
    dright: float
    params: dict = field(repr=False)
    left_fn: Callable[[float], float] = field(repr=False)
    right_fn: Callable[[float], float] = field(repr=False)

    def eval(self, z: float) -> float:
        """Evaluate phi(z); z must lie in [lower, upper] up to float dust."""
        slack = 1e-9 * (self.upper - self.lower)
        if z < self.lower - slack or z > self.upper + slack:
            raise ValueError(f"z={z} outside curve domain [{self.lower}, {self.upper}]")
        z = min(max(z, self.lower), self.upper)
        if z <= self.deflection:
            return float(self.left_fn(z))
        return float(self.right_fn(z))

    @property
    def effective_upper(self) -> float:
        """Largest argument the solver uses; stops short of a hyperbolic pole."""
        if self.kind is CurveKind.POWER_HYPERBOLIC:
            return self.upper - POLE_MARGIN * (self.upper - self.lower)
        return self.upper

    def left_slope(self, z: float) -> float:
        """Derivative of the concave piece at z in [lower, deflection]."""
        kind = self.kind
        p = self.params
        if kind in (CurveKind.POWER_POWER, CurveKind.POWER_HYPERBOLIC):
            if z <= 0.0:
                return math.inf if p["beta1"] < 1.0 else p["alpha1"]
            return p["alpha1"] * p["beta1"] * z ** (p["beta1"] - 1.0)
        if kind is CurveKind.CUBIC:
            return 3.0 * p["a"] * (z - self.deflection) ** 2 + p["eps"]
        return self._fd_slope(self.left_fn, z)

    def right_slope(self, z: float) -> float:
        """Derivative of the convex piece at z in [deflection, upper)."""
        kind = self.kind
        p = self.params
        if kind is CurveKind.POWER_POWER:
            t = z - self.deflection
            if t <= 0.0:
                return p["alpha2"] if p["beta2"] == 1.0 else 0.0
            return p["alpha2"] * p["beta2"] * t ** (p["beta2"] - 1.0)
        if kind is CurveKind.POWER_HYPERBOLIC:
            return p["alpha2"] * (self.upper - self.deflection) / (self.upper - z) ** 2
        if kind is CurveKind.CUBIC:
            return 3.0 * p["a"] * (z - self.deflection) ** 2 + p["eps"]
        return self._fd_slope(self.right_fn, z)

    def _fd_slope(self, fn: Callable[[float], float], z: float) -> float:
        h = FD_STEP_FACTOR * (self.upper - self.lower)
        hi = min(z + h, self.upper)
        lo = max(hi - h, self.lower)
        return (fn(hi) - fn(lo)) / (hi - lo)


def _validate(curve: SCurve) -> None:
    lo, hi, z0 = curve.lower, curve.upper, curve.deflection
    for name, v in (("lower", lo), ("upper", hi), ("deflection", z0)):
        if not math.isfinite(v):
            raise CurveValidationError(f"{name} must be finite, got {v}")
    if not lo < hi:
        raise CurveValidationError(f"need lower < upper, got [{lo}, {hi}]")
    if not lo <= z0 <= hi:
        raise CurveValidationError(f"deflection {z0} outside [{lo}, {hi}]")

    # The hyperbolic family has a pole at the capacity; checks stop just inside.
    scan_hi = curve.effective_upper
    scale = abs(float(curve.right_fn(scan_hi))) if z0 < scan_hi else abs(float(curve.left_fn(scan_hi)))
    tol = REL_TOL * max(1.0, scale)

    left_val = float(curve.left_fn(z0))
    right_val = float(curve.right_fn(z0)) if z0 < hi else left_val
    if z0 > lo and z0 < hi and abs(left_val - right_val) > tol:
        raise CurveValidationError(
            f"discontinuity at deflection: {left_val} vs {right_val}"
        )

    grid = np.linspace(lo, scan_hi, VALIDATION_SAMPLES)
    grid = np.unique(np.append(grid, min(max(z0, lo), scan_hi)))
    vals = np.array([curve.eval(z) for z in grid])
    if not np.all(np.isfinite(vals)):
        raise CurveValidationError("curve evaluates to a non-finite value")
    if np.any(np.diff(vals) < -tol):
        k = int(np.argmin(np.diff(vals)))
        raise CurveValidationError(
            f"curve decreases near z={grid[k]:.6g} ({vals[k]} -> {vals[k + 1]})"
        )

    def _shape(piece_lo: float, piece_hi: float, fn, concave: bool) -> None:
        if piece_hi - piece_lo <= tol:
            return
        g = np.linspace(piece_lo, piece_hi, 129)
        v = np.array([float(fn(z)) for z in g])
        bend = v[:-2] + v[2:] - 2.0 * v[1:-1]
        if concave and np.any(bend > tol):
            raise CurveValidationError("left piece is not concave")
        if not concave and np.any(bend < -tol):
            raise CurveValidationError("right piece is not convex")

    _shape(lo, min(z0, scan_hi), curve.left_fn, concave=True)
    _shape(min(z0, scan_hi), scan_hi, curve.right_fn, concave=False)


def power_power(
    alpha1: float,
    beta1: float,
    alpha2: float,
    beta2: float,
    capacity: float,
    deflection: float,
    lower: float = 0.0,
) -> SCurve:
    """alpha1*z^beta1 below the deflection, quadratic-style power above."""
    if not 0.0 < beta1 < 1.0:
        raise CurveValidationError(f"beta1 must lie in (0,1), got {beta1}")
    if beta2 < 1.0:
        raise CurveValidationError(f"beta2 must be >= 1 for convexity, got {beta2}")
    if alpha1 < 0.0 or alpha2 < 0.0:
        raise CurveValidationError("alpha1 and alpha2 must be nonnegative")
    if lower < 0.0:
        raise CurveValidationError("power family needs lower >= 0")
    base = alpha1 * deflection**beta1

    def left(z: float) -> float:
        return alpha1 * max(z, 0.0) ** beta1

    def right(z: float) -> float:
        return base + alpha2 * max(z - deflection, 0.0) ** beta2

    dright = alpha2 if beta2 == 1.0 else 0.0
    # No concave piece when the deflection sits at the lower end; the cap
    # then continues with the only one-sided slope that exists.
    if deflection <= max(lower, 0.0):
        dleft = dright
    else:
        dleft = alpha1 * beta1 * deflection ** (beta1 - 1.0)
    curve = SCurve(
        kind=CurveKind.POWER_POWER,
        lower=lower,
        upper=capacity,
        deflection=deflection,
        dleft=dleft,
        dright=dright,
        params={"alpha1": alpha1, "beta1": beta1, "alpha2": alpha2, "beta2": beta2},
        left_fn=left,
        right_fn=right,
    )
    _validate(curve)
    return curve


def power_hyperbolic(
    alpha1: float,
    beta1: float,
    alpha2: float,
    capacity: float,
    deflection: float,
    lower: float = 0.0,
) -> SCurve:
    """alpha1*z^beta1 below the deflection, alpha2*(z-z0)/(K-z) above.

    The convex piece blows up at the capacity; all solver-facing
    evaluation stops at ``effective_upper``.
    """
    if not 0.0 < beta1 < 1.0:
        raise CurveValidationError(f"beta1 must lie in (0,1), got {beta1}")
    if alpha1 < 0.0 or alpha2 < 0.0:
        raise CurveValidationError("alpha1 and alpha2 must be nonnegative")
    if lower < 0.0:
        raise CurveValidationError("power family needs lower >= 0")
    if not deflection < capacity:
        raise CurveValidationError("hyperbolic family needs deflection < capacity")
    base = alpha1 * deflection**beta1

    def left(z: float) -> float:
        return alpha1 * max(z, 0.0) ** beta1

    def right(z: float) -> float:
        if z >= capacity:
            return math.inf
        return base + alpha2 * (z - deflection) / (capacity - z)

    dright = alpha2 / (capacity - deflection)
    if deflection <= max(lower, 0.0):
        dleft = dright
    else:
        dleft = alpha1 * beta1 * deflection ** (beta1 - 1.0)
    curve = SCurve(
        kind=CurveKind.POWER_HYPERBOLIC,
        lower=lower,
        upper=capacity,
        deflection=deflection,
        dleft=dleft,
        dright=dright,
        params={"alpha1": alpha1, "beta1": beta1, "alpha2": alpha2},
        left_fn=left,
        right_fn=right,
    )
    _validate(curve)
    return curve


def cubic(
    a: float,
    eps: float,
    const: float,
    capacity: float,
    deflection: float,
    lower: float = 0.0,
) -> SCurve:
    """a*(z-z0)^3 + eps*(z-z0) + const; smooth inverse-S for a > 0, eps >= 0."""
    if a <= 0.0:
        raise CurveValidationError(f"cubic coefficient a must be positive, got {a}")
    if eps < 0.0:
        raise CurveValidationError(f"cubic slope eps must be nonnegative, got {eps}")

    def fn(z: float) -> float:
        t = z - deflection
        return a * t**3 + eps * t + const

    curve = SCurve(
        kind=CurveKind.CUBIC,
        lower=lower,
        upper=capacity,
        deflection=deflection,
        dleft=eps,
        dright=eps,
        params={"a": a, "eps": eps, "const": const},
        left_fn=fn,
        right_fn=fn,
    )
    _validate(curve)
    return curve


def custom(
    fn: Callable[[float], float],
    lower: float,
    upper: float,
    deflection: float,
    dleft: float | None = None,
    dright: float | None = None,
) -> SCurve:
    """Wrap a user callable; one-sided derivatives estimated by finite
    differences with step 1e-6*(upper-lower) when not supplied."""
    h = FD_STEP_FACTOR * (upper - lower)
    if dright is None:
        b = min(deflection + h, upper)
        dright = (fn(b) - fn(deflection)) / (b - deflection) if deflection < upper else None
    if dleft is None:
        a = max(deflection - h, lower)
        dleft = (fn(deflection) - fn(a)) / (deflection - a) if deflection > lower else dright
    if dright is None:
        dright = dleft
    curve = SCurve(
        kind=CurveKind.CUSTOM,
        lower=lower,
        upper=upper,
        deflection=deflection,
        dleft=float(dleft),
        dright=float(dright),
        params={},
        left_fn=fn,
        right_fn=fn,
    )
    _validate(curve)
    return curve


def scale(curve: SCurve, factor: float) -> SCurve:
    """Return factor*phi as a new validated curve (factor > 0)."""
    if factor <= 0.0:
        raise CurveValidationError(f"scale factor must be positive, got {factor}")
    p = curve.params
    if curve.kind is CurveKind.POWER_POWER:
        return power_power(
            factor * p["alpha1"], p["beta1"], factor * p["alpha2"], p["beta2"],
            curve.upper, curve.deflection, curve.lower,
        )
    if curve.kind is CurveKind.POWER_HYPERBOLIC:
        return power_hyperbolic(
            factor * p["alpha1"], p["beta1"], factor * p["alpha2"],
            curve.upper, curve.deflection, curve.lower,
        )
    if curve.kind is CurveKind.CUBIC:
        return cubic(
            factor * p["a"], factor * p["eps"], factor * p["const"],
            curve.upper, curve.deflection, curve.lower,
        )
    inner = curve.left_fn
    return custom(
        lambda z: factor * inner(z),
        curve.lower, curve.upper, curve.deflection,
        factor * curve.dleft, factor * curve.dright,
    )


@dataclass(frozen=True)
class SplitPair:
    """Concave cap / convex cup decomposition of an SCurve.

    m0 = cap(upper) and m1 = cup(effective_upper) are the tight activation
    constants for the regime big-M rows.
    """

    curve: SCurve
    m0: float
    m1: float

    def cap(self, z: float) -> float:
        c = self.curve
        if z <= c.deflection:
            return float(c.left_fn(min(max(z, c.lower), c.upper)))
        return float(c.left_fn(c.deflection)) + (z - c.deflection) * c.dleft

    def cup(self, z: float) -> float:
        c = self.curve
        if z >= c.deflection:
            return float(c.right_fn(min(z, c.upper)))
        return float(c.right_fn(c.deflection)) + (z - c.deflection) * c.dright

    def cap_slope(self, z: float) -> float:
        c = self.curve
        if z < c.deflection:
            return c.left_slope(z)
        return c.dleft

    def cup_slope(self, z: float) -> float:
        c = self.curve
        if z > c.deflection:
            return c.right_slope(z)
        return c.dright


def split(curve: SCurve) -> SplitPair:
    """Decompose phi into its cap and cup halves with tight big-M constants."""
    pair = SplitPair(curve=curve, m0=0.0, m1=0.0)
    m0 = pair.cap(curve.upper)
    m1 = pair.cup(curve.effective_upper)
    return SplitPair(curve=curve, m0=float(m0), m1=float(m1))


def bigm_gamma(pair: SplitPair) -> float:
    """Bound on the complementarity multipliers of the inner-approximation LP.

    L*(upper-lower) + cap(upper) - cap(lower), where L is the steepest cap
    slope seen among the left one-sided derivative at the deflection, the
    slope at the domain lower end, and one-sided finite differences at 64
    uniform points.  Floored at 1.0 so degenerate flat caps stay usable.
    """
    c = pair.curve
    width = c.upper - c.lower
    h = FD_STEP_FACTOR * width
    candidates = [abs(c.dleft)]
    slope_lo = pair.cap_slope(c.lower)
    if not math.isfinite(slope_lo):
        slope_lo = (pair.cap(c.lower + h) - pair.cap(c.lower)) / h
    candidates.append(abs(slope_lo))
    for z in np.linspace(c.lower, c.upper, 64):
        hi = min(z + h, c.upper)
        lo = max(hi - h, c.lower)
        candidates.append(abs(pair.cap(hi) - pair.cap(lo)) / (hi - lo))
    big_l = max(candidates)
    m2 = big_l * width + pair.cap(c.upper) - pair.cap(c.lower)
    return max(float(m2), 1.0)


def from_params(spec: dict) -> SCurve:
    """Build a curve from a serialized parameter mapping (instance files)."""
    kind = spec.get("kind")
    common = dict(
        capacity=float(spec["upper"]),
        deflection=float(spec["deflection"]),
        lower=float(spec.get("lower", 0.0)),
    )
    if kind == CurveKind.POWER_POWER.value:
        return power_power(
            float(spec["alpha1"]), float(spec["beta1"]),
            float(spec["alpha2"]), float(spec["beta2"]), **common,
        )
    if kind == CurveKind.POWER_HYPERBOLIC.value:
        return power_hyperbolic(
            float(spec["alpha1"]), float(spec["beta1"]), float(spec["alpha2"]), **common,
        )
    if kind == CurveKind.CUBIC.value:
        return cubic(float(spec["a"]), float(spec["eps"]), float(spec["const"]), **common)
    raise CurveValidationError(f"unknown or unserializable curve kind: {kind!r}")


def to_params(curve: SCurve) -> dict:
    """Serialize a family curve to a parameter mapping; custom curves refuse."""
    if curve.kind is CurveKind.CUSTOM:
        raise CurveValidationError("custom curves cannot be serialized")
    out = {"kind": curve.kind.value, "lower": curve.lower, "upper": curve.upper,
           "deflection": curve.deflection}
    out.update(curve.params)
    return out
