"""Point sets approximating the concave half from below, their embedding as
KKT systems inside a host MILP, and tangent cutting planes for the convex
half.

The set machinery works on a :class:`~ioaopt.scurve.SplitPair`.  A set of
sample points on the concave half induces a piecewise-linear upper envelope;
``emit_kkt`` writes the optimality system of the envelope LP into a host
model so a single MILP solve prices the envelope at whatever value the
``z`` variable takes.  The convex half is handled classically with tangent
cuts collected in a :class:`CutPool`.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from ioaopt.milp import MilpModel, VarKind
from ioaopt.scurve import SplitPair, bigm_gamma

DUP_FACTOR = 1e-7
SLOPE_CAP = 1e6


class DegenerateDomain(ValueError):
    """The curve domain is too narrow to carry an approximation set."""


class ApproxSet:
    """Sorted sample points on the concave half with their cap values.

    Points closer than ``dup_tol`` to an existing point are treated as
    duplicates and rejected, which is also the outer loop's fixed-point
    detector.
    """

    def __init__(self, pair: SplitPair, points):
        self.pair = pair
        width = pair.curve.upper - pair.curve.lower
        self.dup_tol = DUP_FACTOR * width
        if width <= self.dup_tol:
            raise DegenerateDomain(
                f"domain [{pair.curve.lower}, {pair.curve.upper}] is degenerate")
        self.points: list[float] = []
        self.values: list[float] = []
        for q in points:
            self.add(float(q))
        if len(self.points) < 2:
            raise DegenerateDomain("need at least two distinct sample points")

    def __len__(self) -> int:
        return len(self.points)

    def add(self, q: float) -> bool:
        """Insert a sample point; returns False for duplicates."""
        lo, hi = self.pair.curve.lower, self.pair.curve.upper
        if not lo - self.dup_tol <= q <= hi + self.dup_tol:
            raise ValueError(f"point {q} outside domain [{lo}, {hi}]")
        q = min(max(q, lo), hi)
        i = bisect.bisect_left(self.points, q)
        for k in (i - 1, i):
            if 0 <= k < len(self.points) and abs(self.points[k] - q) <= self.dup_tol:
                return False
        self.points.insert(i, q)
        self.values.insert(i, self.pair.cap(q))
        return True

    def is_duplicate(self, q: float) -> bool:
        i = bisect.bisect_left(self.points, q)
        return any(
            0 <= k < len(self.points) and abs(self.points[k] - q) <= self.dup_tol
            for k in (i - 1, i))


def init_set(pair: SplitPair, extra: int = 0, include_deflection: bool = True) -> ApproxSet:
    """Seed set: domain endpoints, optionally the deflection point, plus
    ``extra`` uniformly spaced interior points."""
    c = pair.curve
    seeds = [c.lower, c.upper]
    if include_deflection:
        seeds.insert(1, c.deflection)
    if extra > 0:
        seeds.extend(np.linspace(c.lower, c.upper, extra + 2)[1:-1])
    return ApproxSet(pair, seeds)


def inner_value(aset: ApproxSet, z: float) -> float:
    """Upper envelope of the sample points, evaluated at ``z``.

    Because the values lie on a concave function the envelope is plain
    linear interpolation between consecutive points.
    """
    pts = aset.points
    if not pts[0] - aset.dup_tol <= z <= pts[-1] + aset.dup_tol:
        raise ValueError(f"z={z} outside the sampled range [{pts[0]}, {pts[-1]}]")
    i = bisect.bisect_left(pts, z)
    for k in (i - 1, i):
        if 0 <= k < len(pts) and abs(pts[k] - z) <= aset.dup_tol:
            return aset.values[k]
    return float(np.interp(z, pts, aset.values))


def envelope_certificate(aset: ApproxSet, z: float):
    """Primal-dual assignment of the pricing system at ``z``.

    Returns ``(mu, gamma, u, alpha, beta, zeta)``: the two samples
    bracketing ``z`` carry the barycentric weight, the supporting line
    through them is the dual, and every other sample is switched off.
    Any embedded block accepts these values verbatim, which makes the
    certificate a building brick for warm-start points.
    """
    pts, vals = aset.points, aset.values
    tau = len(pts)
    z = min(max(z, pts[0]), pts[-1])
    i = min(max(bisect.bisect_right(pts, z) - 1, 0), tau - 2)
    lam = (pts[i + 1] - z) / (pts[i + 1] - pts[i])
    lam = min(max(lam, 0.0), 1.0)
    mu = [0.0] * tau
    mu[i], mu[i + 1] = lam, 1.0 - lam
    beta = (vals[i + 1] - vals[i]) / (pts[i + 1] - pts[i])
    alpha = vals[i] - beta * pts[i]
    # concavity keeps the line above every sample; clamp float dust
    gamma = [max(0.0, alpha + beta * p - v) for p, v in zip(pts, vals)]
    gamma[i] = gamma[i + 1] = 0.0
    u = [0.0 if k in (i, i + 1) else 1.0 for k in range(tau)]
    zeta = lam * vals[i] + (1.0 - lam) * vals[i + 1]
    return mu, gamma, u, alpha, beta, zeta


def _gamma_requirement(points: list[float], values: list[float]) -> float:
    """Largest dual multiplier any facet-supporting line can demand.

    For each consecutive pair of points the supporting line is extended
    across the whole set; the worst excess over the sampled values is the
    multiplier bound that keeps every vertex of the envelope reachable.
    """
    q = np.asarray(points)
    v = np.asarray(values)
    need = 0.0
    for i in range(len(q) - 1):
        dq = q[i + 1] - q[i]
        if dq <= 0:
            continue
        slope = (v[i + 1] - v[i]) / dq
        line = v[i] + slope * (q - q[i])
        need = max(need, float((line - v).max()))
    return need


@dataclass
class KktBlock:
    """Handles into the host model for one embedded envelope system."""

    tag: str
    mu: list[int]
    gamma: list[int]
    u: list[int]
    alpha: int
    beta: int
    zeta: int
    bigm: float
    rows: list[int] = field(default_factory=list)


def emit_kkt(model: MilpModel, aset: ApproxSet, *, z, l0, w, m0: float,
             tag: str) -> KktBlock:
    """Write the envelope-pricing system into ``model``.

    Adds, for a set of tau points: tau weights mu, tau multipliers gamma,
    tau switch binaries u, the line coefficients alpha/beta, and the
    envelope value zeta (3 tau + 3 variables); plus the pricing rows and
    the link ``w >= zeta - m0 (1 - l0)`` (3 tau + 4 rows).  Any feasible
    assignment makes ``sum(mu * values)`` equal the envelope at ``z``
    exactly, so minimizing ``w`` prices the concave half correctly whenever
    ``l0`` is on.
    """
    if len(aset) < 2:
        raise DegenerateDomain("envelope embedding needs at least two points")
    z = model.index_of(z)
    l0 = model.index_of(l0)
    w = model.index_of(w)
    pts, vals = aset.points, aset.values
    tau = len(pts)
    m2 = max(bigm_gamma(aset.pair), _gamma_requirement(pts, vals), 1.0)

    mu = [model.add_var(f"mu_{tag}_{k}", 0.0, 1.0) for k in range(tau)]
    gamma = [model.add_var(f"gamma_{tag}_{k}", 0.0, m2) for k in range(tau)]
    u = [model.add_var(f"u_{tag}_{k}", 0, 1, VarKind.BINARY) for k in range(tau)]
    alpha = model.add_var(f"alpha_{tag}", None, None)
    beta = model.add_var(f"beta_{tag}", None, None)
    zeta = model.add_var(f"zeta_{tag}", min(vals), max(vals))

    blk = KktBlock(tag, mu, gamma, u, alpha, beta, zeta, m2)
    add = blk.rows.append

    coeffs = {zeta: 1.0}
    coeffs.update({mu[k]: -vals[k] for k in range(tau)})
    add(model.add_row(coeffs, ">=", 0.0, name=f"env_{tag}"))
    add(model.add_row({mu[k]: 1.0 for k in range(tau)}, "=", 1.0,
                      name=f"mix_{tag}"))
    link = {mu[k]: pts[k] for k in range(tau)}
    link[z] = -1.0
    add(model.add_row(link, "=", 0.0, name=f"zlink_{tag}"))
    for k in range(tau):
        add(model.add_row({alpha: -1.0, beta: -pts[k], gamma[k]: 1.0}, "=",
                          -vals[k], name=f"stat_{tag}_{k}"))
    for k in range(tau):
        add(model.add_row({gamma[k]: 1.0, u[k]: -m2}, "<=", 0.0,
                          name=f"dualsw_{tag}_{k}"))
    for k in range(tau):
        # the primal-side switch carries coefficient 1 by construction
        add(model.add_row({mu[k]: 1.0, u[k]: 1.0}, "<=", 1.0,
                          name=f"primsw_{tag}_{k}"))
    add(model.add_row({zeta: 1.0, w: -1.0, l0: m0}, "<=", m0,
                      name=f"wlink_{tag}"))
    return blk


@dataclass(frozen=True)
class Cut:
    """Tangent underestimator of the convex half: s >= value + slope (z - anchor)."""

    anchor: float
    value: float
    slope: float

    def at(self, z: float) -> float:
        return self.value + self.slope * (z - self.anchor)


def anchor_ceiling(pair: SplitPair) -> float:
    """Largest cut anchor whose tangent slope stays numerically tame.

    Near a cost pole the tangent slope blows up; a cut anchored there
    carries coefficients the LP arithmetic cannot digest while buying
    almost no tightness.  Tangents lower-bound the convex half wherever
    they are anchored, so pulling the anchor back keeps every bound
    valid.  The slope is nondecreasing on the convex half, which makes
    bisection exact.
    """
    c = pair.curve
    hi = c.effective_upper
    if pair.cup_slope(hi) <= SLOPE_CAP:
        return hi
    lo = c.deflection
    if pair.cup_slope(lo) > SLOPE_CAP:
        return lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if pair.cup_slope(mid) > SLOPE_CAP:
            hi = mid
        else:
            lo = mid
    return lo


def tangent_cut(pair: SplitPair, anchor: float) -> Cut:
    c = pair.curve
    hi = c.effective_upper
    slack = DUP_FACTOR * (c.upper - c.lower)
    if not c.lower - slack <= anchor <= hi + slack:
        raise ValueError(f"cut anchor {anchor} outside [{c.lower}, {hi}]")
    anchor = min(max(anchor, c.lower), anchor_ceiling(pair))
    return Cut(anchor, pair.cup(anchor), pair.cup_slope(anchor))


def apriori_cuts(pair: SplitPair, count: int = 5) -> "CutPool":
    """Tangents at uniform anchors across the convex piece."""
    if count < 1:
        raise ValueError("need at least one cut anchor")
    c = pair.curve
    pool = CutPool(pair)
    for a in np.linspace(c.deflection, anchor_ceiling(pair), count):
        pool.add(tangent_cut(pair, float(a)))
    return pool


class CutPool:
    """Accumulated tangent cuts for one term, deduplicated by anchor.

    The pool persists across outer iterations so relaxations only tighten.
    """

    def __init__(self, pair: SplitPair):
        self.pair = pair
        self.cuts: list[Cut] = []
        self.tol = DUP_FACTOR * (pair.curve.upper - pair.curve.lower)

    def add(self, cut: Cut) -> bool:
        if any(abs(c.anchor - cut.anchor) <= self.tol for c in self.cuts):
            return False
        self.cuts.append(cut)
        return True

    def add_anchor(self, anchor: float) -> bool:
        return self.add(tangent_cut(self.pair, anchor))

    def __iter__(self):
        return iter(self.cuts)

    def __len__(self) -> int:
        return len(self.cuts)
