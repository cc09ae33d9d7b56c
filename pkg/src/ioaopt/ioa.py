"""Exact two-level refinement for MILPs with separable inverse-S cost terms.

A :class:`Problem` is a plain MILP (variables, linear objective, rows) plus
a list of cost terms, each tying one variable to an inverse-S curve.  The
solver splits every curve into a concave and a convex half, prices the
concave half through an embedded envelope system over a growing sample set,
underestimates the convex half with tangent cuts, and alternates:

* inner loop: add tangents until the convex side is tight at the current
  minimizer (classic cutting planes, tolerance ``eps / 10``);
* outer loop: evaluate the true cost at the minimizer (upper bound), add
  the minimizer to every sample set, repeat until the gap closes or the
  candidate repeats (a fixed point, re-certified with a tight inner pass).

Every relaxation solved along the way underestimates the true cost, so its
optimum is a valid global lower bound; candidates are feasible, so their
true cost is a valid upper bound.  ``oracle_solve`` is an independent
piecewise-linear brute force used for cross-checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from ioaopt import approx
from ioaopt.approx import ApproxSet, CutPool, apriori_cuts, init_set, tangent_cut
from ioaopt.milp import (BuiltinBackend, MilpModel, ModelError, Status,
                         VarKind, solve_lp, solve_milp)
from ioaopt.scurve import SCurve, SplitPair, split

DEFAULT_EPS = 0.01
DEFAULT_TIME_LIMIT = 3.0 * 3600.0
MAX_INNER = 200
TIGHT_EPS = 1e-9


@dataclass(frozen=True)
class VarSpec:
    name: str
    lb: float | None = 0.0
    ub: float | None = None
    integer: bool = False


@dataclass(frozen=True)
class LinRow:
    coeffs: dict[str, float]
    sense: str
    rhs: float
    name: str | None = None


@dataclass(frozen=True)
class STerm:
    """One separable cost term: the curve applies to variable ``var``.

    ``switch``, if given, names a host variable in [0, 1] that turns the
    term on; the regime flags then sum to it instead of to one, so a zero
    switch forces the term's variable (and cost) to zero.  Switchable
    terms need a curve starting at zero.
    """

    var: str
    curve: SCurve
    switch: str | None = None


@dataclass
class Problem:
    name: str
    variables: list[VarSpec]
    objective: dict[str, float]
    constraints: list[LinRow]
    sterms: list[STerm]
    offset: float = 0.0

    def validate(self) -> None:
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ModelError("duplicate variable names in problem")
        known = set(names)
        for ref in self.objective:
            if ref not in known:
                raise ModelError(f"objective references unknown variable {ref!r}")
        for row in self.constraints:
            for ref in row.coeffs:
                if ref not in known:
                    raise ModelError(f"row references unknown variable {ref!r}")
        seen_terms = set()
        for t in self.sterms:
            if t.var not in known:
                raise ModelError(f"cost term on unknown variable {t.var!r}")
            if t.var in seen_terms:
                raise ModelError(f"two cost terms on variable {t.var!r}")
            seen_terms.add(t.var)
            if t.switch is not None:
                if t.switch not in known:
                    raise ModelError(f"switch {t.switch!r} is not a variable")
                if t.curve.lower != 0.0:
                    raise ModelError(
                        f"switchable term {t.var!r} needs a curve starting at 0, "
                        f"got lower={t.curve.lower}")


@dataclass
class TermState:
    """Mutable per-term solver state carried across outer iterations."""

    term: STerm
    pair: SplitPair
    aset: ApproxSet
    pool: CutPool


def make_states(problem: Problem, *, extra_points: int = 0,
                include_deflection: bool = True, n_apriori: int = 5) -> list[TermState]:
    states = []
    for term in problem.sterms:
        pair = split(term.curve)
        states.append(TermState(
            term, pair,
            init_set(pair, extra_points, include_deflection),
            apriori_cuts(pair, n_apriori)))
    return states


@dataclass
class TermHandles:
    z: int
    l0: int
    l1: int
    w: int
    p: int
    s: int
    block: approx.KktBlock


def _host_model(problem: Problem) -> MilpModel:
    """Host variables, linear objective, and plain rows; z bounds are
    intersected with the curve domain (switchable terms may rest at 0)."""
    problem.validate()
    model = MilpModel(problem.name)
    tight: dict[str, tuple[float, float]] = {}
    for t in problem.sterms:
        c = t.curve
        lo = 0.0 if t.switch is not None else c.lower
        tight[t.var] = (lo, c.effective_upper)
    for v in problem.variables:
        lb = -math.inf if v.lb is None else v.lb
        ub = math.inf if v.ub is None else v.ub
        if v.name in tight:
            tlo, thi = tight[v.name]
            lb, ub = max(lb, tlo), min(ub, thi)
        kind = VarKind.INTEGER if v.integer else VarKind.CONTINUOUS
        model.add_var(v.name, lb, ub, kind)
    for ref, coef in problem.objective.items():
        model.add_objective({ref: coef})
    model.offset = problem.offset
    for row in problem.constraints:
        model.add_row(dict(row.coeffs), row.sense, row.rhs, name=row.name)
    return model


def _tame_m1(pair: SplitPair) -> float:
    """Activation constant for the convex-side rows.

    The cut pool never demands more than the ceiling tangent extended to
    the domain end, so that value switches the rows exactly; the true
    pole value would drag astronomically large coefficients into the
    relaxation for nothing.  Smooth curves keep their tight constant.
    """
    c = pair.curve
    a = approx.anchor_ceiling(pair)
    hi = c.effective_upper
    if a >= hi:
        return pair.m1
    return pair.cup(a) + pair.cup_slope(a) * (hi - a)


def assemble_mod_sc(problem: Problem, states: list[TermState],
                    ) -> tuple[MilpModel, dict[str, TermHandles]]:
    """Build the linearized relaxation: host + per-term regime binaries,
    half-cost variables w/p, convex-side estimate s with the pooled cuts,
    and the embedded envelope system for the concave side."""
    model = _host_model(problem)
    handles: dict[str, TermHandles] = {}
    for st in states:
        term, pair = st.term, st.pair
        c = pair.curve
        tag = term.var
        z = model.index_of(term.var)
        z0, hi = c.deflection, c.effective_upper
        m0, m1 = pair.m0, _tame_m1(pair)

        l0 = model.add_var(f"l0_{tag}", 0, 1, VarKind.BINARY)
        l1 = model.add_var(f"l1_{tag}", 0, 1, VarKind.BINARY)
        w_lo = min(0.0, pair.cap(c.lower))
        p_lo = min(0.0, pair.cup(c.lower))
        w = model.add_var(f"w_{tag}", w_lo, max(0.0, m0), obj=1.0)
        p = model.add_var(f"p_{tag}", p_lo, max(0.0, m1), obj=1.0)
        s = model.add_var(f"s_{tag}", min(0.0, pair.cup(c.lower)), max(0.0, m1))

        if term.switch is None:
            model.add_row({l0: 1.0, l1: 1.0}, "=", 1.0, name=f"pair_{tag}")
        else:
            model.add_row({l0: 1.0, l1: 1.0, model.index_of(term.switch): -1.0},
                          "=", 0.0, name=f"pair_{tag}")
        model.add_row({z: 1.0, l1: -z0}, ">=", 0.0, name=f"reglo_{tag}")
        model.add_row({z: 1.0, l1: -hi, l0: -z0}, "<=", 0.0, name=f"reghi_{tag}")

        model.add_row({w: 1.0, l0: -m0}, "<=", 0.0, name=f"wcap_{tag}")
        if w_lo < 0.0:
            # off regime must not contribute negative cost
            model.add_row({w: 1.0, l0: -w_lo}, ">=", 0.0, name=f"wfloor_{tag}")
        model.add_row({p: 1.0, l1: -m1}, "<=", 0.0, name=f"pcap_{tag}")
        model.add_row({p: 1.0, s: -1.0, l1: -m1}, ">=", -m1, name=f"plink_{tag}")
        if p_lo < 0.0:
            model.add_row({p: 1.0, l1: -p_lo}, ">=", 0.0, name=f"pfloor_{tag}")

        for i, cut in enumerate(st.pool):
            model.add_row({s: 1.0, z: -cut.slope}, ">=",
                          cut.value - cut.slope * cut.anchor,
                          name=f"cut_{tag}_{i}")

        block = approx.emit_kkt(model, st.aset, z=z, l0=l0, w=w, m0=m0, tag=tag)
        handles[tag] = TermHandles(z, l0, l1, w, p, s, block)
    return model, handles


def relaxation_point(problem: Problem, model: MilpModel,
                     handles: dict[str, TermHandles], states: list[TermState],
                     host: dict[str, float]) -> np.ndarray:
    """Lift a host-feasible point to a full assignment of the relaxation.

    Every integer variable of the assembled model is implied by the host
    point: the regime flags follow the side of the deflection the term
    variable sits on, and the envelope system takes its certificate
    there.  The remaining auxiliaries get their cheapest feasible values,
    which makes the lifted point an incumbent seed for the next solve.
    """
    x = np.zeros(len(model.variables))
    for v in problem.variables:
        x[model.index_of(v.name)] = host[v.name]
    for st in states:
        tag = st.term.var
        h = handles[tag]
        zv = float(x[h.z])
        on = True
        if st.term.switch is not None:
            on = host[st.term.switch] > 0.5
        if on:
            if zv >= st.pair.curve.deflection:
                x[h.l1] = 1.0
            else:
                x[h.l0] = 1.0
        mu, gam, u, alpha, beta, zeta = approx.envelope_certificate(st.aset, zv)
        blk = h.block
        x[blk.mu] = mu
        x[blk.gamma] = gam
        x[blk.u] = u
        x[blk.alpha] = alpha
        x[blk.beta] = beta
        x[blk.zeta] = zeta
        if x[h.l0] > 0.5:
            x[h.w] = zeta
        sv = model.variables[h.s].lb
        for cut in st.pool:
            sv = max(sv, cut.at(zv))
        x[h.s] = sv
        if x[h.l1] > 0.5:
            x[h.p] = sv
    return x


def _seed_relaxation(problem: Problem, model: MilpModel,
                     handles: dict[str, TermHandles], states: list[TermState],
                     ) -> tuple[np.ndarray, float] | None:
    """Incumbent for a freshly assembled relaxation, grown from its LP.

    The LP point picks each term's regime (and switch); pinning those
    flags and re-solving keeps the host part feasible, and the lifted
    point is integral by construction.  Falls back to the everything-on
    convex regime when the rounding is infeasible; None when neither
    pinning admits a point.
    """
    rel = solve_lp(model)
    if rel.status is not Status.OPTIMAL:
        return None
    for force_on in (False, True):
        patch = {}
        for st in states:
            h = handles[st.term.var]
            on = True
            if st.term.switch is not None and not force_on:
                on = rel.x[model.index_of(st.term.switch)] > 0.5
            if not on:
                patch[h.l0] = (0.0, 0.0)
                patch[h.l1] = (0.0, 0.0)
            elif force_on or rel.x[h.z] >= st.pair.curve.deflection:
                patch[h.l0] = (0.0, 0.0)
                patch[h.l1] = (1.0, 1.0)
            else:
                patch[h.l0] = (1.0, 1.0)
                patch[h.l1] = (0.0, 0.0)
        fixed = solve_lp(model, patch=patch)
        if fixed.status is Status.OPTIMAL:
            host = {v.name: float(fixed.x[model.index_of(v.name)])
                    for v in problem.variables}
            x0 = relaxation_point(problem, model, handles, states, host)
            return x0, float(model.objective_value(x0))
    return None


def evaluate(problem: Problem, assignment: dict[str, float]) -> float:
    """True objective of a point: linear part plus active curve costs."""
    total = problem.offset
    for ref, coef in problem.objective.items():
        total += coef * assignment[ref]
    for t in problem.sterms:
        if t.switch is not None and assignment[t.switch] < 0.5:
            continue
        z = assignment[t.var]
        z = min(max(z, t.curve.lower), t.curve.effective_upper)
        total += t.curve.eval(z)
    return total


def gap_fraction(lb: float, ub: float) -> float:
    """Relative optimality gap (ub - lb) / |lb|."""
    if math.isinf(lb) or math.isinf(ub) or math.isnan(lb) or math.isnan(ub):
        return math.inf
    diff = ub - lb
    if diff <= 0.0:
        return 0.0
    if abs(lb) < 1e-12:
        return math.inf
    return diff / abs(lb)


def gap_percent(lb: float, ub: float) -> float:
    g = gap_fraction(lb, ub)
    return math.inf if math.isinf(g) else 100.0 * g


@dataclass
class InnerResult:
    status: Status
    lb: float = -math.inf
    ub: float = math.inf
    assignment: dict[str, float] | None = None
    iterations: int = 0
    milp_solves: int = 0
    stalled: bool = False


def cutting_plane_solve(problem: Problem, states: list[TermState], *,
                        eps_inner: float, backend=None,
                        deadline: float | None = None,
                        warm: dict[str, float] | None = None) -> InnerResult:
    """Tighten the convex side with tangents until the relaxation is
    ``eps_inner``-exact at its own minimizer.  Every pooled cut persists,
    so later calls only see tighter relaxations.  ``warm``, a feasible
    host assignment, is lifted into an incumbent for the first solve;
    without one the relaxation LP is rounded into a seed instead."""
    backend = backend or BuiltinBackend()
    model, handles = assemble_mod_sc(problem, states)
    out = InnerResult(Status.OPTIMAL)
    cut_serial = {st.term.var: len(st.pool) for st in states}
    # half the tolerance goes to the solver, half to the cut residual
    gap_tol = max(1e-9, 0.5 * eps_inner)
    if warm is not None:
        x0 = relaxation_point(problem, model, handles, states, warm)
        seed = (x0, float(model.objective_value(x0)))
    elif isinstance(backend, BuiltinBackend):
        seed = _seed_relaxation(problem, model, handles, states)
    else:
        seed = None

    def lifter(x: np.ndarray) -> np.ndarray:
        """Round a fractional node point into a feasible incumbent.

        Switches only gate their own term, so rounding them up never
        breaks a host row; everything else is implied by the host part.
        """
        host = {v.name: float(x[model.index_of(v.name)])
                for v in problem.variables}
        for st in states:
            if st.term.switch is not None:
                host[st.term.switch] = 1.0 if host[st.term.switch] > 1e-8 else 0.0
        return relaxation_point(problem, model, handles, states, host)

    # each pricing block is an adjacency-restricted selection over its
    # sample points: expose (weights, off-switches) for window branching
    groups = [(list(h.block.mu), list(h.block.u)) for h in handles.values()]

    for it in range(1, MAX_INNER + 1):
        remaining = None
        if deadline is not None:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                out.status = Status.TIME_LIMIT
                return out
        res = backend.solve(model, time_limit=remaining, gap_tol=gap_tol,
                            incumbent=seed, heuristic=lifter, groups=groups)
        out.milp_solves += 1
        out.iterations = it
        if res.status is Status.INFEASIBLE or res.status is Status.UNBOUNDED \
                or res.status is Status.NUMERICAL:
            out.status = res.status
            return out
        if res.status is Status.TIME_LIMIT:
            out.status = Status.TIME_LIMIT
            if math.isfinite(res.best_bound):
                out.lb = max(out.lb, res.best_bound)
            if res.x is not None and math.isfinite(res.objective):
                out.assignment = model.assignment(res.x)
            return out

        asg = model.assignment(res.x)
        out.lb = res.best_bound if math.isfinite(res.best_bound) else res.objective
        out.assignment = asg
        # replace the cut estimate by the true convex half at the minimizer;
        # the repaired point doubles as a warm start for the re-solve
        ub = res.objective
        lifted = res.x.copy()
        for st in states:
            tag = st.term.var
            if asg[f"l1_{tag}"] > 0.5:
                zv = min(max(asg[tag], st.pair.curve.lower),
                         st.pair.curve.effective_upper)
                val = st.pair.cup(zv)
                ub += val - asg[f"p_{tag}"]
                h = handles[tag]
                lifted[h.s] = max(lifted[h.s], val)
                lifted[h.p] = max(lifted[h.p], val)
        out.ub = ub
        seed = (lifted, ub)
        if gap_fraction(out.lb, out.ub) <= eps_inner:
            return out

        grew = False
        for st in states:
            tag = st.term.var
            if asg[f"l1_{tag}"] <= 0.5:
                continue
            zv = min(max(asg[tag], st.pair.curve.lower),
                     st.pair.curve.effective_upper)
            cut = tangent_cut(st.pair, zv)
            if st.pool.add(cut):
                grew = True
                i = cut_serial[tag]
                cut_serial[tag] += 1
                h = handles[tag]
                model.add_row({h.s: 1.0, h.z: -cut.slope}, ">=",
                              cut.value - cut.slope * cut.anchor,
                              name=f"cut_{tag}_{i}")
        if not grew:
            out.stalled = True
            return out
    out.stalled = True
    return out


@dataclass
class TraceRow:
    iteration: int
    lb: float
    ub_iter: float
    ub_best: float
    gap_pct: float
    candidates: dict[str, float]
    inner_iterations: int
    milp_solves: int
    cuts: int
    wall_time: float


@dataclass
class IoaResult:
    status: Status
    reason: str
    objective: float
    assignment: dict[str, float] | None
    lb: float
    ub: float
    iterations: int
    milp_solves: int
    wall_time: float
    trace: list[TraceRow] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return gap_fraction(self.lb, self.ub)

    @property
    def gap_pct(self) -> float:
        return gap_percent(self.lb, self.ub)


def _plain_result(problem: Problem, res, wall: float) -> IoaResult:
    reason = {Status.OPTIMAL: "gap", Status.TIME_LIMIT: "time_limit",
              Status.INFEASIBLE: "infeasible"}.get(res.status, "numerical")
    asg = None
    if res.status in (Status.OPTIMAL, Status.TIME_LIMIT) and math.isfinite(res.objective):
        asg = {v.name: float(x) for v, x in
               zip(_host_model(problem).variables, res.x)}
    ub = res.objective if asg is not None else math.inf
    return IoaResult(res.status, reason, ub, asg, res.best_bound, ub,
                     0, 1, wall)


def ioa_solve(problem: Problem, *, eps: float = DEFAULT_EPS,
              time_limit: float = DEFAULT_TIME_LIMIT, backend=None,
              extra_points: int = 0, include_deflection: bool = True,
              n_apriori: int = 5, eps_inner: float | None = None,
              states: list[TermState] | None = None) -> IoaResult:
    """Solve to a proven relative gap ``eps``.

    Returns the best candidate found together with the certified bounds;
    ``reason`` is one of gap, fixed_point, time_limit, infeasible,
    numerical.
    """
    start = time.monotonic()
    deadline = start + time_limit
    backend = backend or BuiltinBackend()
    problem.validate()

    if not problem.sterms:
        res = backend.solve(_host_model(problem), time_limit=time_limit)
        return _plain_result(problem, res, time.monotonic() - start)

    if states is None:
        states = make_states(problem, extra_points=extra_points,
                             include_deflection=include_deflection,
                             n_apriori=n_apriori)
    if eps_inner is None:
        eps_inner = eps / 10.0

    trace: list[TraceRow] = []
    lb_best = -math.inf
    ub_best = math.inf
    best_asg: dict[str, float] | None = None
    milp_solves = 0

    def result(status, reason, iters):
        return IoaResult(status, reason,
                         ub_best if best_asg is not None else math.inf,
                         best_asg, lb_best, ub_best, iters, milp_solves,
                         time.monotonic() - start, trace)

    iteration = 0
    warm: dict[str, float] | None = None
    while True:
        iteration += 1
        inner = cutting_plane_solve(problem, states, eps_inner=eps_inner,
                                    backend=backend, deadline=deadline,
                                    warm=warm)
        milp_solves += inner.milp_solves
        if inner.status in (Status.INFEASIBLE, Status.UNBOUNDED, Status.NUMERICAL):
            reason = "infeasible" if inner.status is Status.INFEASIBLE else "numerical"
            return result(inner.status, reason, iteration)

        if math.isfinite(inner.lb):
            lb_best = max(lb_best, inner.lb)
        ub_iter = math.inf
        if inner.assignment is not None:
            ub_iter = evaluate(problem, inner.assignment)
            if ub_iter < ub_best:
                ub_best = ub_iter
                best_asg = inner.assignment
        candidates = {}
        if inner.assignment is not None:
            candidates = {st.term.var: inner.assignment[st.term.var]
                          for st in states}
        trace.append(TraceRow(
            iteration, lb_best, ub_iter, ub_best,
            gap_percent(lb_best, ub_best), candidates,
            inner.iterations, milp_solves,
            sum(len(st.pool) for st in states),
            time.monotonic() - start))

        if inner.status is Status.TIME_LIMIT or time.monotonic() >= deadline:
            return result(Status.TIME_LIMIT, "time_limit", iteration)
        if gap_fraction(lb_best, ub_best) <= eps:
            return result(Status.OPTIMAL, "gap", iteration)
        if inner.assignment is not None:
            warm = inner.assignment

        grew = False
        for st in states:
            if st.aset.add(candidates[st.term.var]):
                grew = True
        if grew:
            continue

        # Repeated candidate: the sample sets are at a fixed point, so one
        # tight inner pass certifies the bound at full precision.
        inner = cutting_plane_solve(problem, states, eps_inner=TIGHT_EPS,
                                    backend=backend, deadline=deadline,
                                    warm=warm)
        milp_solves += inner.milp_solves
        if inner.status is Status.OPTIMAL:
            if math.isfinite(inner.lb):
                lb_best = max(lb_best, inner.lb)
            if inner.assignment is not None:
                ub_iter = evaluate(problem, inner.assignment)
                if ub_iter < ub_best:
                    ub_best = ub_iter
                    best_asg = inner.assignment
            trace.append(TraceRow(
                iteration + 1, lb_best, ub_iter, ub_best,
                gap_percent(lb_best, ub_best), candidates,
                inner.iterations, milp_solves,
                sum(len(st.pool) for st in states),
                time.monotonic() - start))
            if gap_fraction(lb_best, ub_best) <= eps:
                return result(Status.OPTIMAL, "gap", iteration + 1)
            return result(Status.OPTIMAL, "fixed_point", iteration + 1)
        if inner.status is Status.TIME_LIMIT:
            return result(Status.TIME_LIMIT, "time_limit", iteration)
        return result(inner.status, "numerical", iteration)


# -- independent brute-force check ------------------------------------


@dataclass
class OracleResult:
    status: Status
    objective: float
    assignment: dict[str, float] | None
    grid_slack: float
    nodes: int
    wall_time: float


class _TermGrid:
    """Uniform grid of one term's curve with per-window lower hulls."""

    def __init__(self, term: STerm, resolution: int):
        c = term.curve
        self.term = term
        self.q = np.linspace(c.lower, c.effective_upper, resolution + 1)
        self.v = np.array([c.eval(float(q)) for q in self.q])
        self.switchable = term.switch is not None
        self.off_shift = max(0.0, float(self.v[0])) if self.switchable else 0.0
        # sampled deviation between the curve and its interpolant
        worst = 0.0
        for k in range(resolution):
            for tpos in (0.25, 0.5, 0.75):
                zz = self.q[k] + tpos * (self.q[k + 1] - self.q[k])
                pw = self.v[k] + (self.v[k + 1] - self.v[k]) * tpos
                worst = max(worst, abs(c.eval(float(zz)) - pw))
        self.slack = worst

    def pwl(self, z: float) -> float:
        return float(np.interp(z, self.q, self.v))

    def hull(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        """Lower-hull vertices of grid points a..b (monotone chain)."""
        xs, ys = self.q[a:b + 1], self.v[a:b + 1]
        keep: list[int] = []
        for i in range(len(xs)):
            while len(keep) >= 2:
                i1, i2 = keep[-2], keep[-1]
                cross = (xs[i2] - xs[i1]) * (ys[i] - ys[i1]) \
                    - (ys[i2] - ys[i1]) * (xs[i] - xs[i1])
                if cross <= 1e-14:
                    keep.pop()
                else:
                    break
            keep.append(i)
        return xs[keep], ys[keep]


def _hull_at(hx: np.ndarray, hy: np.ndarray, z: float) -> tuple[float, float, float]:
    """Value, slope, intercept of the hull facet active at z."""
    if len(hx) == 1:
        return float(hy[0]), 0.0, float(hy[0])
    k = int(np.searchsorted(hx, z, side="right")) - 1
    k = min(max(k, 0), len(hx) - 2)
    slope = (hy[k + 1] - hy[k]) / (hx[k + 1] - hx[k])
    intercept = hy[k] - slope * hx[k]
    return slope * z + intercept, slope, intercept


def oracle_solve(problem: Problem, resolution: int = 512,
                 time_limit: float | None = None) -> OracleResult:
    """Independent global solve on a piecewise-linear surrogate.

    Each curve is replaced by its interpolant on a uniform grid; the exact
    surrogate optimum is found by branch and bound that relaxes every
    window of the grid to its lower convex hull (facets generated lazily)
    and branches on regime binaries and window splits.  ``grid_slack``
    bounds how far the surrogate optimum can sit from the true one.
    """
    start = time.monotonic()
    problem.validate()
    if not problem.sterms:
        res = solve_milp(_host_model(problem), time_limit=time_limit)
        asg = None
        if math.isfinite(res.objective) and res.x is not None:
            asg = {v.name: float(x) for v, x in
                   zip(_host_model(problem).variables, res.x)}
        return OracleResult(res.status, res.objective, asg, 0.0,
                            res.node_count, time.monotonic() - start)
    if resolution < 1:
        raise ValueError("resolution must be at least 1")

    grids = [_TermGrid(t, resolution) for t in problem.sterms]

    def facet_row(model, g, slope: float, intercept: float):
        """t >= the facet line when the term is on; relaxed to t >= min(0,
        line(0)) when off so a closed term can rest at zero cost."""
        t = model.index_of(f"t_{g.term.var}")
        z = model.index_of(g.term.var)
        coeffs = {t: 1.0, z: -slope}
        shift = max(0.0, intercept) if g.switchable else 0.0
        if shift > 0.0:
            coeffs[model.index_of(f"l0_{g.term.var}")] = -shift
            coeffs[model.index_of(f"l1_{g.term.var}")] = -shift
            model.add_row(coeffs, ">=", intercept - shift)
        else:
            model.add_row(coeffs, ">=", intercept)

    def build(windows, patches):
        model = _host_model(problem)
        relaxed_bin = []
        for ti, g in enumerate(grids):
            tag = g.term.var
            c = g.term.curve
            a, b = windows[ti]
            z = model.index_of(tag)
            l0 = model.add_var(f"l0_{tag}", 0, 1)
            l1 = model.add_var(f"l1_{tag}", 0, 1)
            relaxed_bin.extend([f"l0_{tag}", f"l1_{tag}"])
            t_lo = min(0.0, float(g.v.min()))
            t = model.add_var(f"t_{tag}", t_lo,
                              max(0.0, float(g.v.max())), obj=1.0)
            if g.term.switch is None:
                model.add_row({l0: 1.0, l1: 1.0}, "=", 1.0)
            else:
                model.add_row({l0: 1.0, l1: 1.0,
                               model.index_of(g.term.switch): -1.0}, "=", 0.0)
                if t_lo < 0.0:
                    model.add_row({t: 1.0, l0: -t_lo, l1: -t_lo}, ">=", 0.0)
            model.add_row({z: 1.0, l1: -c.deflection}, ">=", 0.0)
            model.add_row({z: 1.0, l1: -c.effective_upper, l0: -c.deflection},
                          "<=", 0.0)
            # confine an open term to its window; a closed one stays at 0
            zj = model.variables[z]
            lo_w, hi_w = float(g.q[a]), float(g.q[b])
            if g.switchable:
                if lo_w > 0.0:
                    model.add_row({z: 1.0, l0: -lo_w, l1: -lo_w}, ">=", 0.0)
                model.variables[z] = type(zj)(zj.name, zj.lb,
                                              min(zj.ub, hi_w), zj.kind)
            else:
                model.variables[z] = type(zj)(zj.name, max(zj.lb, lo_w),
                                              min(zj.ub, hi_w), zj.kind)
        for name, (lo, hi) in patches.items():
            j = model.index_of(name)
            v = model.variables[j]
            model.variables[j] = type(v)(v.name, max(v.lb, lo),
                                         min(v.ub, hi), v.kind)
        return model, relaxed_bin

    host = _host_model(problem)
    host_ints = [host.variables[j].name for j in host.integer_indices()]

    full = tuple((0, resolution) for _ in grids)
    heap = [(-math.inf, 0, full, {})]
    counter = 1
    best = math.inf
    best_asg = None
    nodes = 0
    timed_out = False
    INT_TOL = 1e-6

    while heap:
        bound, _, windows, patches = heappop(heap)
        if bound >= best - 1e-9 * max(1.0, abs(best)):
            break
        if time_limit is not None and time.monotonic() - start > time_limit:
            timed_out = True
            break
        nodes += 1

        hulls = [g.hull(a, b) for g, (a, b) in zip(grids, windows)]
        model, relaxed_bin = build(windows, patches)
        seen_facets = [set() for _ in grids]
        res = solve_lp(model)
        for _ in range(2 * resolution + 8):
            if res.status is not Status.OPTIMAL:
                break
            asg = model.assignment(res.x)
            missing = False
            for ti, g in enumerate(grids):
                zv = asg[g.term.var]
                open_frac = asg[f"l0_{g.term.var}"] + asg[f"l1_{g.term.var}"]
                hv, slope, intercept = _hull_at(*hulls[ti], zv)
                shift = max(0.0, intercept) if g.switchable else 0.0
                want = slope * zv + intercept - shift * (1.0 - open_frac)
                tv = asg[f"t_{g.term.var}"]
                if tv < want - 1e-8 * max(1.0, abs(want)) \
                        and (slope, intercept) not in seen_facets[ti]:
                    seen_facets[ti].add((slope, intercept))
                    facet_row(model, g, slope, intercept)
                    missing = True
            if not missing:
                break
            res = solve_lp(model)
        if res.status is Status.INFEASIBLE:
            continue
        if res.status is Status.UNBOUNDED:
            return OracleResult(Status.UNBOUNDED, -math.inf, None,
                                sum(g.slack for g in grids), nodes,
                                time.monotonic() - start)
        if res.status is not Status.OPTIMAL:
            raise RuntimeError("surrogate node relaxation failed numerically")
        if res.objective >= best - 1e-9 * max(1.0, abs(best)):
            continue
        asg = model.assignment(res.x)

        frac_name = None
        frac_dist = -1.0
        for name in host_ints + relaxed_bin:
            val = asg[name]
            dist = abs(val - round(val))
            if dist > INT_TOL and dist > frac_dist:
                frac_name, frac_dist = name, dist
        if frac_name is not None:
            val = asg[frac_name]
            for lo, hi in ((-math.inf, math.floor(val)), (math.ceil(val), math.inf)):
                np_patch = dict(patches)
                cur = np_patch.get(frac_name, (-math.inf, math.inf))
                np_patch[frac_name] = (max(cur[0], lo), min(cur[1], hi))
                heappush(heap, (res.objective, counter, windows, np_patch))
                counter += 1
            continue

        worst_ti, worst_gap = -1, 0.0
        for ti, g in enumerate(grids):
            open_frac = asg[f"l0_{g.term.var}"] + asg[f"l1_{g.term.var}"]
            if g.switchable and open_frac < 0.5:
                continue
            a, b = windows[ti]
            if b - a < 2:
                continue  # single segment: the hull is the interpolant
            zv = asg[g.term.var]
            hv, _, _ = _hull_at(*hulls[ti], zv)
            gap = g.pwl(zv) - hv
            if gap > worst_gap:
                worst_ti, worst_gap = ti, gap
        if worst_ti >= 0 and worst_gap > 1e-9 * max(1.0, abs(res.objective)):
            g = grids[worst_ti]
            a, b = windows[worst_ti]
            zv = asg[g.term.var]
            h = (g.q[b] - g.q[a]) / (b - a)
            split_at = int(round((zv - float(g.q[a])) / h)) + a
            split_at = min(max(split_at, a + 1), b - 1)
            for wa, wb in ((a, split_at), (split_at, b)):
                nw = list(windows)
                nw[worst_ti] = (wa, wb)
                heappush(heap, (res.objective, counter, tuple(nw), patches))
                counter += 1
            continue

        # integral and hull-tight: recompute the surrogate objective exactly
        val = problem.offset
        for ref, coef in problem.objective.items():
            val += coef * asg[ref]
        for g in grids:
            open_frac = asg[f"l0_{g.term.var}"] + asg[f"l1_{g.term.var}"]
            if g.switchable and open_frac < 0.5:
                continue
            val += g.pwl(asg[g.term.var])
        if val < best:
            best = val
            best_asg = {v.name: asg[v.name] for v in host.variables}

    slack = sum(g.slack for g in grids)
    wall = time.monotonic() - start
    if best_asg is None:
        status = Status.TIME_LIMIT if timed_out else Status.INFEASIBLE
        return OracleResult(status, math.inf, None, slack, nodes, wall)
    status = Status.TIME_LIMIT if timed_out else Status.OPTIMAL
    return OracleResult(status, best, best_asg, slack, nodes, wall)
