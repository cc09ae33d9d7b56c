"""Dense bounded-variable simplex, two phases, explicit basis inverse.

Rows are equilibrated to unit max-norm, slack and artificial columns share
one preallocated block so branch-and-bound can re-solve with different
bounds without rebuilding matrices.  Pricing is Dantzig with a permanent
switch to Bland's rule after a run of degenerate steps; the basis inverse
is refreshed from scratch periodically and before the final answer, and a
residual check downgrades anything suspicious to a NUMERICAL status rather
than returning a wrong answer.

Because bound changes never disturb dual feasibility, a parent-optimal
basis re-solves under tightened bounds with a short dual phase
(``lp_resolve_arrays``); anything suspicious there falls back to the cold
two-phase path instead of guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ioaopt.milp.model import Status

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

DJ_TOL = 1e-9
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-6
DEGEN_STEP = 1e-10
BLAND_AFTER = 120
REFACTOR_EVERY = 100


@dataclass
class Workspace:
    """Shared scaled matrices: columns are [structurals | slacks | artificials]."""

    afull: np.ndarray
    b: np.ndarray
    senses: list[str]
    n: int
    m: int


@dataclass
class SimplexResult:
    status: Status
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = np.nan
    iterations: int = 0
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basis: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vstat: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    @property
    def start(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Warm-start handle for ``lp_resolve_arrays``, if one was kept."""
        if self.basis.size == 0 or self.vstat.size == 0:
            return None
        return self.basis, self.vstat


def make_workspace(a: np.ndarray, b: np.ndarray, senses: list[str]) -> Workspace:
    m, n = a.shape
    if m:
        scale = np.abs(a).max(axis=1) if n else np.zeros(m)
        scale = np.maximum(scale, 1.0)
        a_s = a / scale[:, None]
        b_s = b / scale
        afull = np.hstack([a_s, np.eye(m), np.eye(m)])
    else:
        b_s = np.zeros(0)
        afull = np.zeros((0, n))
    return Workspace(afull=afull, b=b_s, senses=list(senses), n=n, m=m)


def _bounds_only(c: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> SimplexResult:
    x = np.zeros_like(lb)
    for j in range(len(c)):
        if c[j] > 0.0:
            if not np.isfinite(lb[j]):
                return SimplexResult(status=Status.UNBOUNDED)
            x[j] = lb[j]
        elif c[j] < 0.0:
            if not np.isfinite(ub[j]):
                return SimplexResult(status=Status.UNBOUNDED)
            x[j] = ub[j]
        else:
            x[j] = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
    return SimplexResult(
        status=Status.OPTIMAL, x=x, objective=float(c @ x),
        reduced_costs=c.copy(),
    )


class _Tableau:
    def __init__(self, ws: Workspace, lb: np.ndarray, ub: np.ndarray):
        self.ws = ws
        m, n = ws.m, ws.n
        self.ncols = n + 2 * m
        self.lb = np.full(self.ncols, -np.inf)
        self.ub = np.full(self.ncols, np.inf)
        self.lb[:n] = lb
        self.ub[:n] = ub
        for i, sense in enumerate(ws.senses):
            s = n + i
            if sense == "<=":
                self.lb[s], self.ub[s] = 0.0, np.inf
            elif sense == ">=":
                self.lb[s], self.ub[s] = -np.inf, 0.0
            else:
                self.lb[s], self.ub[s] = 0.0, 0.0
        # Artificial columns are opened per-solve only where needed.
        self.lb[n + m:] = 0.0
        self.ub[n + m:] = 0.0

        self.vstat = np.empty(self.ncols, dtype=np.int8)
        self.xval = np.zeros(self.ncols)
        for j in range(self.ncols):
            if np.isfinite(self.lb[j]):
                self.vstat[j], self.xval[j] = AT_LOWER, self.lb[j]
            elif np.isfinite(self.ub[j]):
                self.vstat[j], self.xval[j] = AT_UPPER, self.ub[j]
            else:
                self.vstat[j], self.xval[j] = FREE, 0.0

        self.basis = np.empty(m, dtype=np.int64)
        self.binv = np.eye(m)
        self.pivots_since_refactor = 0
        self.iterations = 0

    def install_start_basis(self) -> np.ndarray:
        """Slack basis where the residual fits slack bounds, artificials elsewhere.

        Returns the phase-1 cost vector, or None when already feasible."""
        ws, n, m = self.ws, self.ws.n, self.ws.m
        if m == 0:
            return None
        resid = ws.b - ws.afull[:, :n] @ self.xval[:n]
        phase1_cost = np.zeros(self.ncols)
        need_phase1 = False
        for i in range(m):
            s, a = n + i, n + m + i
            r = resid[i]
            if self.lb[s] - 1e-12 <= r <= self.ub[s] + 1e-12:
                self.basis[i] = s
                self.vstat[s] = BASIC
                self.xval[s] = min(max(r, self.lb[s]), self.ub[s])
            else:
                need_phase1 = True
                self.basis[i] = a
                self.vstat[a] = BASIC
                self.xval[a] = r
                if r > 0.0:
                    self.ub[a] = np.inf
                    phase1_cost[a] = 1.0
                else:
                    self.lb[a] = -np.inf
                    phase1_cost[a] = -1.0
        self.binv = np.eye(m)
        return phase1_cost if need_phase1 else None

    def refactor(self) -> bool:
        ws, m = self.ws, self.ws.m
        if m == 0:
            return True
        bmat = ws.afull[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:
            return False
        nonbasic_mask = np.ones(self.ncols, dtype=bool)
        nonbasic_mask[self.basis] = False
        rhs = ws.b - ws.afull[:, nonbasic_mask] @ self.xval[nonbasic_mask]
        self.xval[self.basis] = self.binv @ rhs
        self.pivots_since_refactor = 0
        return True

    def primal_loop(self, cost: np.ndarray, maxiter: int, locked: np.ndarray):
        """Run the primal simplex to optimality for the given cost vector.

        Returns one of "optimal", "unbounded", "numerical"."""
        ws, m = self.ws, self.ws.m
        movable = (self.ub - self.lb) > 0.0
        movable &= ~locked
        bland = False
        degen_streak = 0
        dj_tol = DJ_TOL * max(1.0, float(np.abs(cost).max(initial=0.0)))

        for _ in range(maxiter):
            self.iterations += 1
            y = cost[self.basis] @ self.binv
            d = cost - y @ ws.afull
            at_lo = (self.vstat == AT_LOWER) & movable & (d < -dj_tol)
            at_up = (self.vstat == AT_UPPER) & movable & (d > dj_tol)
            free = (self.vstat == FREE) & movable & (np.abs(d) > dj_tol)
            cand = np.flatnonzero(at_lo | at_up | free)
            if cand.size == 0:
                return "optimal"
            if bland:
                e = int(cand[0])
            else:
                e = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if (self.vstat[e] == AT_LOWER or (self.vstat[e] == FREE and d[e] < 0)) else -1.0

            w = self.binv @ ws.afull[:, e]
            delta = -sigma * w
            xb = self.xval[self.basis]
            lo_b, up_b = self.lb[self.basis], self.ub[self.basis]

            t_best = self.ub[e] - self.lb[e] if np.isfinite(self.ub[e] - self.lb[e]) else np.inf
            leave = -1
            hit_upper = False
            dec = delta < -PIVOT_TOL
            inc = delta > PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where(dec, (xb - lo_b) / np.where(dec, -delta, 1.0), np.inf)
                t_inc = np.where(inc, (up_b - xb) / np.where(inc, delta, 1.0), np.inf)
            t_rows = np.minimum(
                np.nan_to_num(t_dec, nan=np.inf, posinf=np.inf),
                np.nan_to_num(t_inc, nan=np.inf, posinf=np.inf))
            t_rows = np.maximum(t_rows, 0.0)
            if m and t_rows.size:
                tmin = float(t_rows.min())
                if tmin < t_best:
                    ties = np.flatnonzero(t_rows <= tmin * (1.0 + 1e-9) + 1e-12)
                    if bland:
                        leave = int(ties[np.argmin(self.basis[ties])])
                    else:
                        leave = int(ties[np.argmax(np.abs(delta[ties]))])
                    t_best = max(tmin, 0.0)
                    hit_upper = delta[leave] > 0.0

            if not np.isfinite(t_best):
                return "unbounded"

            if t_best <= DEGEN_STEP:
                degen_streak += 1
                if degen_streak > BLAND_AFTER:
                    bland = True
            else:
                degen_streak = 0

            self.xval[self.basis] = xb + t_best * delta
            if leave < 0:
                # Bound flip: the entering variable crosses to its other bound.
                self.vstat[e] = AT_UPPER if sigma > 0 else AT_LOWER
                self.xval[e] = self.ub[e] if sigma > 0 else self.lb[e]
                continue

            lv = int(self.basis[leave])
            self.vstat[lv] = AT_UPPER if hit_upper else AT_LOWER
            self.xval[lv] = self.ub[lv] if hit_upper else self.lb[lv]
            enter_val = self.xval[e] + sigma * t_best
            self.basis[leave] = e
            self.vstat[e] = BASIC
            self.xval[e] = enter_val

            pivot = w[leave]
            brow = self.binv[leave] / pivot
            self.binv -= np.outer(w, brow)
            self.binv[leave] = brow
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= REFACTOR_EVERY:
                if not self.refactor():
                    return "numerical"
        return "numerical"

    def install_warm_basis(self, basis, vstat) -> bool:
        """Adopt a basis from an earlier solve over the same rows.

        Nonbasic values snap to the current bounds, so the basics computed
        by the refactor absorb every bound change at once."""
        self.basis = np.asarray(basis, dtype=np.int64).copy()
        self.vstat[:] = np.asarray(vstat, dtype=np.int8)
        at_lo = self.vstat == AT_LOWER
        at_up = self.vstat == AT_UPPER
        self.xval[at_lo] = self.lb[at_lo]
        self.xval[at_up] = self.ub[at_up]
        self.xval[self.vstat == FREE] = 0.0
        return self.refactor()

    def dual_loop(self, cost: np.ndarray, maxiter: int, locked: np.ndarray):
        """Drive out-of-bound basics to their bounds, keeping reduced costs
        feasible.  Returns "feasible", "infeasible", or "stuck"."""
        ws, m = self.ws, self.ws.m
        movable = (self.ub - self.lb) > 0.0
        movable &= ~locked

        for _ in range(maxiter):
            xb = self.xval[self.basis]
            lo_b, up_b = self.lb[self.basis], self.ub[self.basis]
            below = np.where(np.isfinite(lo_b), lo_b - xb, -np.inf)
            above = np.where(np.isfinite(up_b), xb - up_b, -np.inf)
            viol = np.maximum(below, above)
            tol = 1e-9 * (1.0 + np.abs(xb))
            r = int(np.argmax(viol - tol))
            if viol[r] <= tol[r]:
                return "feasible"
            self.iterations += 1
            to_lower = below[r] >= above[r]

            y = cost[self.basis] @ self.binv
            d = cost - y @ ws.afull
            arow = self.binv[r] @ ws.afull
            # entering moves the leaving basic toward its violated bound
            if to_lower:
                ok_lo = movable & (self.vstat == AT_LOWER) & (arow < -PIVOT_TOL)
                ok_up = movable & (self.vstat == AT_UPPER) & (arow > PIVOT_TOL)
            else:
                ok_lo = movable & (self.vstat == AT_LOWER) & (arow > PIVOT_TOL)
                ok_up = movable & (self.vstat == AT_UPPER) & (arow < -PIVOT_TOL)
            ok_fr = movable & (self.vstat == FREE) & (np.abs(arow) > PIVOT_TOL)
            cand = np.flatnonzero(ok_lo | ok_up | ok_fr)
            if cand.size == 0:
                return "infeasible"
            ratio = np.abs(d[cand]) / np.abs(arow[cand])
            best = float(ratio.min())
            ties = cand[ratio <= best * (1.0 + 1e-9) + 1e-12]
            e = int(ties[np.argmax(np.abs(arow[ties]))])
            if abs(arow[e]) < 1e-8:
                return "stuck"

            if self.vstat[e] == AT_LOWER:
                sigma = 1.0
            elif self.vstat[e] == AT_UPPER:
                sigma = -1.0
            else:
                sigma = 1.0 if (to_lower == (arow[e] < 0.0)) else -1.0
            w = self.binv @ ws.afull[:, e]
            need = (lo_b[r] - xb[r]) if to_lower else (up_b[r] - xb[r])
            t = need / (-sigma * w[r])
            if not np.isfinite(t) or t < 0.0:
                return "stuck"

            self.xval[self.basis] = xb - t * sigma * w
            lv = int(self.basis[r])
            self.vstat[lv] = AT_LOWER if to_lower else AT_UPPER
            self.xval[lv] = self.lb[lv] if to_lower else self.ub[lv]
            enter_val = self.xval[e] + sigma * t
            self.basis[r] = e
            self.vstat[e] = BASIC
            self.xval[e] = enter_val

            brow = self.binv[r] / w[r]
            self.binv -= np.outer(w, brow)
            self.binv[r] = brow
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= REFACTOR_EVERY:
                if not self.refactor():
                    return "stuck"
        return "stuck"


def lp_solve_arrays(
    ws: Workspace,
    c: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    maxiter: int | None = None,
) -> SimplexResult:
    """Solve min c@x over the workspace rows with the given structural bounds."""
    n, m = ws.n, ws.m
    if np.any(lb > ub + 1e-12):
        return SimplexResult(status=Status.INFEASIBLE)
    if m == 0:
        return _bounds_only(c, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))

    tab = _Tableau(ws, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))
    if maxiter is None:
        maxiter = 200 * (m + n) + 2000
    locked = np.zeros(tab.ncols, dtype=bool)
    locked[n + m:] = True

    phase1_cost = tab.install_start_basis()
    if phase1_cost is not None:
        # Artificials start basic and may leave; the lock mask only stops
        # them from ever re-entering.
        outcome = tab.primal_loop(phase1_cost, maxiter, locked)
        if outcome == "numerical" or outcome == "unbounded":
            return SimplexResult(status=Status.NUMERICAL)
        infeas = float(phase1_cost @ tab.xval)
        if infeas > FEAS_TOL * (1.0 + float(np.abs(ws.b).max(initial=0.0))):
            return SimplexResult(status=Status.INFEASIBLE)
        _pivot_out_artificials(tab)
        # Lock every artificial at zero for phase 2.
        tab.lb[n + m:] = 0.0
        tab.ub[n + m:] = 0.0
        tab.xval[n + m:] = np.clip(tab.xval[n + m:], 0.0, 0.0)

    cost = np.zeros(tab.ncols)
    cost[:n] = c
    outcome = tab.primal_loop(cost, maxiter, locked)
    if outcome == "unbounded":
        return SimplexResult(status=Status.UNBOUNDED)
    if outcome == "numerical":
        return SimplexResult(status=Status.NUMERICAL)
    return _certified(tab, c, cost)


def _certified(tab: _Tableau, c: np.ndarray, cost: np.ndarray) -> SimplexResult:
    """Refresh the inverse, audit the point, and package the answer."""
    ws, n = tab.ws, tab.ws.n
    if not tab.refactor():
        return SimplexResult(status=Status.NUMERICAL)
    if not np.all(np.isfinite(tab.xval)):
        return SimplexResult(status=Status.NUMERICAL)
    resid = ws.afull @ tab.xval - ws.b
    scale = 1.0 + float(np.abs(ws.b).max(initial=0.0))
    with np.errstate(invalid="ignore"):
        bound_slip = np.maximum(tab.lb - tab.xval, tab.xval - tab.ub).max(initial=0.0)
    if float(np.abs(resid).max(initial=0.0)) > FEAS_TOL * scale or bound_slip > FEAS_TOL * scale:
        return SimplexResult(status=Status.NUMERICAL)

    y = cost[tab.basis] @ tab.binv
    d = cost - y @ ws.afull
    x = tab.xval[:n].copy()
    return SimplexResult(
        status=Status.OPTIMAL,
        x=x,
        objective=float(c @ x),
        iterations=tab.iterations,
        reduced_costs=d[:n].copy(),
        duals=y.copy(),
        basis=tab.basis.copy(),
        vstat=tab.vstat.copy(),
    )


def lp_resolve_arrays(
    ws: Workspace,
    c: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    start: tuple,
    maxiter: int | None = None,
) -> SimplexResult:
    """Re-solve after bound changes, starting from an earlier basis.

    The start basis stays dual feasible under any bound change, so a dual
    phase followed by a primal cleanup normally needs a handful of pivots.
    Every questionable outcome falls back to the cold two-phase solve.
    """
    n, m = ws.n, ws.m
    if m == 0 or np.any(lb > ub + 1e-12):
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)

    tab = _Tableau(ws, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))
    basis, vstat = start
    if len(basis) != m or len(vstat) != tab.ncols:
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    if not tab.install_warm_basis(basis, vstat):
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    locked = np.zeros(tab.ncols, dtype=bool)
    locked[n + m:] = True
    if maxiter is None:
        maxiter = 200 * (m + n) + 2000

    cost = np.zeros(tab.ncols)
    cost[:n] = c
    outcome = tab.dual_loop(cost, maxiter, locked)
    if outcome == "infeasible":
        # the blocked row is a tolerance-based certificate; let the cold
        # two-phase path have the final word on infeasibility
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    if outcome == "stuck":
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    # the dual phase ends primal feasible; the primal loop certifies
    # optimality and repairs any leftover reduced-cost drift
    outcome = tab.primal_loop(cost, maxiter, locked)
    if outcome == "unbounded":
        return SimplexResult(status=Status.UNBOUNDED)
    if outcome == "numerical":
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    res = _certified(tab, c, cost)
    if res.status is Status.NUMERICAL:
        return lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    return res


def lp_probe_arrays(
    ws: Workspace,
    c: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    start: tuple,
    maxiter: int = 40,
) -> float:
    """Score a bound change from an earlier basis, without certification.

    Runs the dual phase only and reports the objective it reaches; +inf
    when the dual phase runs out of eligible pivots, which usually means
    the probed child is infeasible.  The dual objective climbs toward the
    child optimum, so a truncated run underestimates it: callers may rank
    branching candidates with the score but must never prune on it.
    """
    n, m = ws.n, ws.m
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + 1e-12):
        return math.inf
    if m == 0:
        return -math.inf
    tab = _Tableau(ws, lb, ub)
    basis, vstat = start
    if len(basis) != m or len(vstat) != tab.ncols:
        return -math.inf
    if not tab.install_warm_basis(basis, vstat):
        return -math.inf
    locked = np.zeros(tab.ncols, dtype=bool)
    locked[n + m:] = True
    cost = np.zeros(tab.ncols)
    cost[:n] = c
    outcome = tab.dual_loop(cost, maxiter, locked)
    if outcome == "infeasible":
        return math.inf
    if not np.all(np.isfinite(tab.xval)):
        return -math.inf
    return float(cost @ tab.xval)


def _pivot_out_artificials(tab: _Tableau) -> None:
    """Degenerate pivots replacing basic zero artificials by real columns."""
    ws = tab.ws
    n, m = ws.n, ws.m
    for r in range(m):
        bv = int(tab.basis[r])
        if bv < n + m:
            continue
        row = tab.binv[r] @ ws.afull[:, : n + m]
        row[tab.vstat[: n + m] == BASIC] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) <= 1e-7:
            continue  # redundant row: artificial stays basic, pinned at zero
        w = tab.binv @ ws.afull[:, j]
        pivot = w[r]
        enter_val = tab.xval[j]
        tab.vstat[bv] = AT_LOWER
        tab.xval[bv] = 0.0
        tab.basis[r] = j
        tab.vstat[j] = BASIC
        tab.xval[j] = enter_val
        brow = tab.binv[r] / pivot
        tab.binv -= np.outer(w, brow)
        tab.binv[r] = brow
