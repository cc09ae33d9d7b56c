"""Branch and bound over the dense simplex.

Node selection dives depth-first along the rounding direction until the
plunge is pruned, then falls back to best bound.  On models with more
than a dozen integers, every binary is probed once at the root with a
truncated dual re-solve; branching then prefers the variables whose
worse fixing lifts the relaxation the most, so the bound-carrying
switches are decided before bookkeeping binaries.  A root probe whose
direction proves infeasible fixes the binary globally.  There is no cut
generation and every rule is deterministic given the model and limits.
Near-integral LP points are re-solved with the integers fixed to their
rounded values before being accepted as incumbents; that keeps big-M
models from leaking relaxation dust into reported objectives.  A caller
that already knows a feasible point can seed it through ``incumbent``
to prune from the start.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ioaopt.milp.model import MilpModel, MilpSolution, Status
from ioaopt.milp.simplex import (Workspace, lp_probe_arrays, lp_resolve_arrays,
                                 lp_solve_arrays, make_workspace)

INT_TOL = 1e-6
DEFAULT_GAP = 1e-9
ROUNDING_TRIGGER = 20
SEED_FEAS_TOL = 1e-6
WEIGHT_SUPPORT_TOL = 1e-7
PRIME_MIN_INTS = 13
PRIME_MAXITER = 40


def solve_lp(model: MilpModel, maxiter: int | None = None,
             patch: dict[int, tuple[float, float]] | None = None) -> MilpSolution:
    """Solve the LP relaxation (integrality dropped).

    ``patch`` optionally overrides variable bounds by index, e.g. to probe
    the relaxation with some binaries pinned.
    """
    started = time.perf_counter()
    c, a, senses, b, lb, ub = model.to_arrays()
    if patch:
        for j, (lo, hi) in patch.items():
            lb[j], ub[j] = lo, hi
    ws = make_workspace(a, b, senses)
    res = lp_solve_arrays(ws, c, lb, ub, maxiter=maxiter)
    return _wrap(model, res, nodes=0, started=started)


def _wrap(model: MilpModel, res, nodes: int, started: float) -> MilpSolution:
    wall = time.perf_counter() - started
    if res.status is Status.OPTIMAL:
        obj = res.objective + model.offset
        return MilpSolution(Status.OPTIMAL, obj, res.x, obj, nodes, wall)
    if res.status is Status.INFEASIBLE:
        return MilpSolution(Status.INFEASIBLE, math.inf, np.zeros(0), math.inf, nodes, wall)
    if res.status is Status.UNBOUNDED:
        return MilpSolution(Status.UNBOUNDED, -math.inf, np.zeros(0), -math.inf, nodes, wall)
    return MilpSolution(Status.NUMERICAL, math.nan, np.zeros(0), -math.inf, nodes, wall)


def _accept_seed(model: MilpModel, c, int_idx, incumbent) -> tuple[float, np.ndarray] | None:
    x0 = np.asarray(incumbent[0], dtype=float)
    if x0.shape != (len(model.variables),):
        return None
    if model.max_violation(x0) > SEED_FEAS_TOL:
        return None
    if int_idx.size and np.any(np.abs(x0[int_idx] - np.round(x0[int_idx])) > INT_TOL):
        return None
    return float(c @ x0), x0.copy()


def solve_milp(
    model: MilpModel,
    time_limit: float | None = None,
    gap_tol: float = DEFAULT_GAP,
    node_cap: int | None = None,
    incumbent: tuple[np.ndarray, float] | None = None,
    heuristic=None,
    groups: list[tuple[list[int], list[int]]] | None = None,
) -> MilpSolution:
    """Exact minimization; OPTIMAL means proven within gap_tol (relative).

    ``incumbent`` is an optional known-feasible warm start ``(x, objective)``;
    it is validated against the model and silently dropped if it does not
    check out.  ``heuristic``, if given, maps a fractional node solution to
    a candidate vector (or None); candidates pass the same validation, so a
    wrong heuristic can waste time but never corrupt the search.

    ``groups`` describes adjacency-restricted selections: each entry pairs
    the ordered weight columns with their off-switch binaries.  A feasible
    point concentrates each group's weight on adjacent positions (ties over
    a straight stretch excepted, where any split attains the same value),
    so instead of rounding one switch the search halves the allowed window
    at the weight median.
    """
    started = time.perf_counter()
    c, a, senses, b, lb0, ub0 = model.to_arrays()
    ws = make_workspace(a, b, senses)
    int_idx = np.array(model.integer_indices(), dtype=np.int64)

    root = lp_solve_arrays(ws, c, lb0, ub0)
    if root.status is not Status.OPTIMAL or int_idx.size == 0:
        return _wrap(model, root, nodes=1, started=started)

    prio_lo = prio_hi = np.zeros(len(c))
    if int_idx.size >= PRIME_MIN_INTS and root.start is not None:
        prime_deadline = None
        if time_limit is not None:
            prime_deadline = started + 0.25 * time_limit
        prio_lo, prio_hi, root = _prime_root(ws, c, lb0, ub0, int_idx, root,
                                             prime_deadline)
        if root is None:
            return MilpSolution(Status.INFEASIBLE, math.inf, np.zeros(0),
                                math.inf, 1, time.perf_counter() - started, [])
        if root.status is not Status.OPTIMAL:
            return _wrap(model, root, nodes=1, started=started)
    root_start = root.start

    inc_obj = math.inf
    inc_x: np.ndarray | None = None
    if incumbent is not None:
        seeded = _accept_seed(model, c, int_idx, incumbent)
        if seeded is not None:
            inc_obj, inc_x = seeded

    # rows touched per column: branch structure before bookkeeping binaries
    col_nnz = (a != 0.0).sum(axis=0) if a.size else np.zeros(len(c))

    gweights: list[np.ndarray] = []
    gswitch: list[np.ndarray] = []
    if groups:
        for w_idx, s_idx in groups:
            gweights.append(np.asarray(w_idx, dtype=np.int64))
            gswitch.append(np.asarray(s_idx, dtype=np.int64))
    grouped_idx = (np.unique(np.concatenate(gswitch)) if gswitch
                   else np.empty(0, dtype=np.int64))

    events: list[tuple[int, float, float]] = []
    counter = 0
    nodes = 0
    # node: (bound, tiebreak, bound patch, parent basis for the warm start)
    heap: list[tuple[float, int, dict, tuple | None]] = []
    stack: list[tuple[float, int, dict, tuple | None]] = []
    heapq.heappush(heap, (root.objective, counter, {}, root_start))

    def slack(bound: float) -> float:
        ref = inc_obj if math.isfinite(inc_obj) else bound
        return gap_tol * max(1.0, abs(ref))

    # lowest bound ever fathomed by the incumbent test; the proven global
    # bound can never be claimed above it once subtrees are cut with slack
    fathomed = math.inf

    def best_bound() -> float:
        lo = min((entry[0] for entry in heap), default=math.inf)
        lo = min(lo, min((entry[0] for entry in stack), default=math.inf))
        return min(lo, fathomed, inc_obj)

    def try_incumbent(x: np.ndarray, raw_obj: float, patch: dict, integral: bool,
                      start: tuple | None) -> None:
        nonlocal inc_obj, inc_x
        fixed = dict(patch)
        for j in int_idx:
            v = round(float(x[j]))
            fixed[int(j)] = (float(v), float(v))
        res = _solve_node(ws, c, lb0, ub0, fixed, start)
        if res.status is Status.OPTIMAL:
            cand_obj, cand_x = res.objective, res.x
        elif integral:
            # Rounding infeasible by a tolerance artifact: keep the LP point,
            # which satisfies integrality and rows within solver tolerances.
            cand_obj, cand_x = raw_obj, x
        else:
            return
        if cand_obj < inc_obj - 1e-12:
            inc_obj = cand_obj
            inc_x = cand_x.copy()
            events.append((nodes, best_bound(), inc_obj))

    timed_out = False
    while heap or stack:
        if stack:
            bound, _, patch, start = stack.pop()
            from_stack = True
        else:
            bound, _, patch, start = heapq.heappop(heap)
            from_stack = False
        if bound >= inc_obj - slack(bound):
            fathomed = min(fathomed, bound)
            if from_stack:
                continue
            break
        if time_limit is not None and time.perf_counter() - started > time_limit:
            heapq.heappush(heap, (bound, -1, patch, start))
            timed_out = True
            break
        if node_cap is not None and nodes >= node_cap:
            heapq.heappush(heap, (bound, -1, patch, start))
            timed_out = True
            break
        nodes += 1
        res = _solve_node(ws, c, lb0, ub0, patch, start)
        if res.status is Status.NUMERICAL:
            return MilpSolution(Status.NUMERICAL, math.nan, np.zeros(0), -math.inf,
                                nodes, time.perf_counter() - started, events)
        if res.status is not Status.OPTIMAL:
            continue
        if res.objective >= inc_obj - slack(res.objective):
            fathomed = min(fathomed, res.objective)
            continue

        frac = np.abs(res.x[int_idx] - np.round(res.x[int_idx]))
        fractional = np.flatnonzero(frac > INT_TOL)
        if fractional.size == 0:
            try_incumbent(res.x, res.objective, patch, integral=True,
                          start=res.start)
            continue
        if heuristic is not None:
            lift_obj = math.inf
            cand = heuristic(res.x)
            if cand is not None:
                seeded = _accept_seed(model, c, int_idx, (cand, 0.0))
                if seeded is not None:
                    lift_obj = seeded[0]
                    if seeded[0] < inc_obj - 1e-12:
                        inc_obj, inc_x = seeded
                        events.append((nodes, best_bound(), inc_obj))
            if res.objective >= inc_obj - slack(res.objective):
                fathomed = min(fathomed, res.objective)
                continue
            if lift_obj <= res.objective + 1e-9 * max(1.0, abs(res.objective)):
                # the lifted point attains this node's own bound, so nothing
                # below can improve on it: the subtree is solved exactly
                fathomed = min(fathomed, res.objective)
                continue
        if fractional.size <= 6 or \
                (fractional.size <= ROUNDING_TRIGGER and nodes % 8 == 1):
            try_incumbent(res.x, res.objective, patch, integral=False,
                          start=res.start)
            if res.objective >= inc_obj - slack(res.objective):
                fathomed = min(fathomed, res.objective)
                continue

        pick_from = fractional
        if grouped_idx.size:
            ungrouped = fractional[~np.isin(int_idx[fractional], grouped_idx)]
            if ungrouped.size:
                # resolve structural binaries before selection windows
                pick_from = ungrouped
            else:
                split = _group_split(gweights, gswitch, res.x, patch, lb0, ub0)
                if split is not None:
                    toward, away = split
                    counter += 1
                    heapq.heappush(heap, (res.objective, counter, away, res.start))
                    counter += 1
                    stack.append((res.objective, counter, toward, res.start))
                    events.append((nodes, best_bound(), inc_obj))
                    continue

        dist = np.minimum(frac[pick_from], 1.0 - frac[pick_from])
        nnz = col_nnz[int_idx[pick_from]]
        order = np.lexsort((int_idx[pick_from], -dist, -nnz,
                            -prio_hi[int_idx[pick_from]],
                            -prio_lo[int_idx[pick_from]]))
        pick = pick_from[order[0]]
        j = int(int_idx[pick])
        val = float(res.x[j])
        lo_j, up_j = patch.get(j, (lb0[j], ub0[j]))
        down = dict(patch)
        down[j] = (lo_j, math.floor(val))
        up = dict(patch)
        up[j] = (math.ceil(val), up_j)
        # dive toward the rounding direction, park the other child
        toward, away = (up, down) if val - math.floor(val) >= 0.5 else (down, up)
        counter += 1
        heapq.heappush(heap, (res.objective, counter, away, res.start))
        counter += 1
        stack.append((res.objective, counter, toward, res.start))
        events.append((nodes, best_bound(), inc_obj))

    wall = time.perf_counter() - started
    bound_out = best_bound()
    if inc_x is None:
        if timed_out:
            return MilpSolution(Status.TIME_LIMIT, math.inf, np.zeros(0), bound_out,
                                nodes, wall, events)
        return MilpSolution(Status.INFEASIBLE, math.inf, np.zeros(0), math.inf,
                            nodes, wall, events)
    status = Status.TIME_LIMIT if timed_out else Status.OPTIMAL
    return MilpSolution(status, inc_obj + model.offset, inc_x,
                        bound_out + (model.offset if math.isfinite(bound_out) else 0.0),
                        nodes, wall, events)


def _prime_root(ws, c, lb0, ub0, int_idx, root, deadline):
    """Probe both fixings of every root-fractional integer.

    Returns per-column priorities holding the relaxation lift of the worse
    and the better fixing; branching prefers columns whose worse child
    already moves the bound.  A direction that a certified re-solve proves
    infeasible tightens ``lb0``/``ub0`` for the whole search; ``None`` in
    place of the root result means the model itself is infeasible.
    """
    prio_lo = np.zeros(len(c))
    prio_hi = np.zeros(len(c))
    start = root.start
    base = root.objective
    changed = False
    for j in int_idx:
        j = int(j)
        lo_j, hi_j = float(lb0[j]), float(ub0[j])
        if hi_j - lo_j < 0.5:
            continue
        v = float(root.x[j])
        if abs(v - round(v)) <= INT_TOL:
            continue
        if deadline is not None and time.perf_counter() > deadline:
            break
        scores = []
        dead = []
        for lo, hi in ((lo_j, math.floor(v)), (math.ceil(v), hi_j)):
            lbp, ubp = lb0.copy(), ub0.copy()
            lbp[j], ubp[j] = lo, hi
            s = lp_probe_arrays(ws, c, lbp, ubp, start, maxiter=PRIME_MAXITER)
            bad = False
            if s == math.inf:
                # the probe is only a hint; certify before cutting anything
                chk = lp_resolve_arrays(ws, c, lbp, ubp, start)
                if chk.status is Status.INFEASIBLE:
                    bad = True
                elif chk.status is Status.OPTIMAL:
                    s = chk.objective
                else:
                    s = base
            scores.append(s)
            dead.append(bad)
        if dead[0] and dead[1]:
            return prio_lo, prio_hi, None
        if dead[0]:
            lb0[j] = math.ceil(v)
            changed = True
        elif dead[1]:
            ub0[j] = math.floor(v)
            changed = True
        else:
            lifts = sorted(max(s - base, 0.0) for s in scores)
            prio_lo[j], prio_hi[j] = lifts[0], lifts[1]
    if changed:
        root = lp_solve_arrays(ws, c, lb0, ub0)
    return prio_lo, prio_hi, root


def _group_split(gweights, gswitch, x, patch, lb0, ub0):
    """Dichotomy children for the worst adjacency violation, if any.

    Picks the group whose weight support spans the widest sample window and
    splits that window at the weighted median: the left child switches off
    every position above the split, the right child every position below it.
    Keeping the split position itself alive on both sides preserves every
    attainable (coordinate, value) pair, because weight spread across a
    window only survives the switch rows when the spanned samples are
    colinear, and then either half attains the same interpolated value.
    """
    best = None
    best_span = 1
    for w_idx, s_idx in zip(gweights, gswitch):
        wv = x[w_idx]
        sup = np.flatnonzero(wv > WEIGHT_SUPPORT_TOL)
        if sup.size < 2:
            continue
        span = int(sup[-1] - sup[0])
        if span > best_span:
            best = (s_idx, wv, sup)
            best_span = span
    if best is None:
        return None
    s_idx, wv, sup = best
    total = float(wv[sup].sum())
    cum = 0.0
    s = int(sup[0])
    for k in sup:
        cum += float(wv[k])
        if cum >= 0.5 * total:
            s = int(k)
            break
    # both children must drop at least one supported position
    s = min(max(s, int(sup[0]) + 1), int(sup[-1]) - 1)
    left = dict(patch)
    right = dict(patch)
    for pos, j in enumerate(s_idx):
        j = int(j)
        lo_j, up_j = patch.get(j, (float(lb0[j]), float(ub0[j])))
        if lo_j > 0.5 or up_j < 0.5:
            continue
        if pos > s:
            left[j] = (1.0, 1.0)
        elif pos < s:
            right[j] = (1.0, 1.0)
    mass_left = float(wv[: s + 1].sum())
    if mass_left >= 0.5 * total:
        return left, right
    return right, left


def _solve_node(ws: Workspace, c, lb0, ub0, patch: dict, start: tuple | None = None):
    if patch:
        lb = lb0.copy()
        ub = ub0.copy()
        for j, (lo, hi) in patch.items():
            lb[j] = lo
            ub[j] = hi
    else:
        lb, ub = lb0, ub0
    if start is not None:
        return lp_resolve_arrays(ws, c, lb, ub, start)
    return lp_solve_arrays(ws, c, lb, ub)
