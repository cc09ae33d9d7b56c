"""Capacitated facility location with inverse-S production costs.

An instance holds facilities (fixed cost, capacity, production curve),
customer demands, and a per-unit transport matrix.  ``build_problem``
turns it into a :class:`~ioaopt.ioa.Problem`: continuous flows, one
switchable cost term per facility, and scenario weights that scale the
transport and production components or relocate the deflection point.
``summarize`` validates a solver assignment against the original
formulation and reports the regime counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ioaopt import ioa
from ioaopt.scurve import SCurve, cubic, power_hyperbolic, power_power, scale, split

FEAS_TOL = 1e-6
OBJ_REL_TOL = 1e-5
AUDIT_REL_TOL = 1e-6


class InfeasibleAssignment(ValueError):
    """An assignment violates the location formulation; the row is named."""


@dataclass(frozen=True)
class Facility:
    fixed_cost: float
    capacity: float
    deflection: float
    curve: SCurve


@dataclass
class FlpInstance:
    """Immutable problem data; solve-time weights live in build_problem."""

    name: str
    facilities: list[Facility]
    demands: np.ndarray
    transport: np.ndarray
    ftype: int | None = None
    structure: int | None = None
    beta: float | None = None
    set_id: str | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return len(self.facilities)

    @property
    def m(self) -> int:
        return len(self.demands)

    def validate(self) -> None:
        self.demands = np.asarray(self.demands, dtype=float)
        self.transport = np.asarray(self.transport, dtype=float)
        if self.transport.shape != (self.m, self.n):
            raise ValueError(
                f"transport matrix is {self.transport.shape}, expected {(self.m, self.n)}")
        if np.any(self.demands < 0.0) or np.any(self.transport < 0.0):
            raise ValueError("demands and transport costs must be nonnegative")
        for j, fac in enumerate(self.facilities):
            if fac.fixed_cost < 0.0 or fac.capacity < 0.0:
                raise ValueError(f"facility {j} has negative cost or capacity")
            if not math.isclose(fac.curve.upper, fac.capacity, rel_tol=1e-9):
                raise ValueError(
                    f"facility {j} curve tops out at {fac.curve.upper}, "
                    f"capacity is {fac.capacity}")
        total_k = sum(f.capacity for f in self.facilities)
        total_d = float(self.demands.sum())
        if total_k < total_d * (1.0 - 1e-12):
            raise ValueError(
                f"total capacity {total_k:g} cannot cover total demand {total_d:g}")


def production_curve(ftype: int, structure: int, capacity: float,
                     deflection: float) -> SCurve:
    """Benchmark production-cost catalog.

    Three families: square root turning quadratic, square root turning
    hyperbolic (pole at capacity), and a smooth cubic.  Structure 3 is
    the heavy-production variant with parameters scaled tenfold; the
    other structures reuse the base curve (they rescale fixed or
    transport costs instead, which lives in the instance data).
    """
    if structure not in (1, 2, 3, 4):
        raise ValueError(f"unknown cost structure {structure}")
    heavy = structure == 3
    if ftype == 1:
        return power_power(
            alpha1=400.0 if heavy else 40.0, beta1=0.5,
            alpha2=5.0 if heavy else 0.5, beta2=2.0,
            capacity=capacity, deflection=deflection)
    if ftype == 2:
        return power_hyperbolic(
            alpha1=400.0 if heavy else 40.0, beta1=0.5,
            alpha2=(200.0 if heavy else 20.0) * math.sqrt(deflection),
            capacity=capacity, deflection=deflection)
    if ftype == 3:
        a = 1e-3 if heavy else 1e-4
        return cubic(a=a, eps=0.0, const=a * deflection**3,
                     capacity=capacity, deflection=deflection)
    raise ValueError(f"unknown function type {ftype}")


def _flow(i: int, j: int) -> str:
    return f"x_{i}_{j}"


def build_problem(instance: FlpInstance, *, alpha: float = 1.0,
                  theta: float = 1.0, beta: float | None = None) -> ioa.Problem:
    """Instance plus scenario weights to a solvable problem.

    ``alpha`` scales transport, ``theta`` scales every production curve,
    and ``beta`` (if given) moves each deflection point to ``beta * K``
    by rebuilding the curve from the instance's cost-family metadata.
    """
    if alpha <= 0.0 or theta <= 0.0:
        raise ValueError("alpha and theta must be positive")
    if beta is not None and not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    instance.validate()
    m, n = instance.m, instance.n

    curves = []
    for j, fac in enumerate(instance.facilities):
        curve = fac.curve
        if beta is not None and not math.isclose(
                curve.deflection, beta * fac.capacity, rel_tol=1e-9):
            if instance.ftype is None:
                raise ValueError(
                    "moving the deflection point needs the instance's "
                    "cost-family metadata (ftype/structure)")
            curve = production_curve(
                instance.ftype, instance.structure or 1,
                fac.capacity, beta * fac.capacity)
        if theta != 1.0:
            curve = scale(curve, theta)
        curves.append(curve)

    variables = [ioa.VarSpec(_flow(i, j), 0.0, float(instance.demands[i]))
                 for i in range(m) for j in range(n)]
    variables += [ioa.VarSpec(f"z_{j}", 0.0, fac.capacity)
                  for j, fac in enumerate(instance.facilities)]
    variables += [ioa.VarSpec(f"lam_{j}", 0.0, 1.0) for j in range(n)]

    objective: dict[str, float] = {}
    for j, fac in enumerate(instance.facilities):
        objective[f"lam_{j}"] = fac.fixed_cost
    for i in range(m):
        for j in range(n):
            objective[_flow(i, j)] = alpha * float(instance.transport[i, j])

    constraints = []
    for i in range(m):
        constraints.append(ioa.LinRow(
            {_flow(i, j): 1.0 for j in range(n)}, ">=",
            float(instance.demands[i]), name=f"demand_{i}"))
    for j in range(n):
        coeffs = {_flow(i, j): -1.0 for i in range(m)}
        coeffs[f"z_{j}"] = 1.0
        constraints.append(ioa.LinRow(coeffs, ">=", 0.0, name=f"prod_{j}"))

    sterms = [ioa.STerm(f"z_{j}", curves[j], switch=f"lam_{j}")
              for j in range(n)]
    problem = ioa.Problem(name=instance.name, variables=variables,
                          objective=objective, constraints=constraints,
                          sterms=sterms)
    problem.validate()
    return problem


@dataclass
class FlpSolution:
    open_flags: np.ndarray
    regime_lo: np.ndarray
    regime_hi: np.ndarray
    production: np.ndarray
    flows: np.ndarray
    objective: float
    n_e: int
    n_d: int
    n_T: int


def _reject(row: str, detail: str):
    raise InfeasibleAssignment(f"assignment violates {row}: {detail}")


def summarize(instance: FlpInstance, problem: ioa.Problem,
              assignment: dict[str, float],
              solver_objective: float | None = None) -> FlpSolution:
    """Validate an assignment and compress it into regime counts.

    The objective is recomputed from the original curves, never the
    approximation, and cross-checked against the solver's number when
    one is supplied.  The regime split is audited: weighted piece values
    must recombine to the true production cost.
    """
    m, n = instance.m, instance.n
    try:
        flows = np.array([[assignment[_flow(i, j)] for j in range(n)]
                          for i in range(m)])
        z = np.array([assignment[f"z_{j}"] for j in range(n)])
        lam = np.array([assignment[f"lam_{j}"] for j in range(n)])
        l0 = np.array([assignment[f"l0_z_{j}"] for j in range(n)])
        l1 = np.array([assignment[f"l1_z_{j}"] for j in range(n)])
    except KeyError as exc:
        raise InfeasibleAssignment(f"assignment is missing variable {exc}") from exc

    scale_d = max(1.0, float(instance.demands.max(initial=0.0)))
    if np.any(flows < -FEAS_TOL * scale_d):
        i, j = np.argwhere(flows < -FEAS_TOL * scale_d)[0]
        _reject(f"x_{i}_{j} >= 0", f"flow is {flows[i, j]:g}")
    for i in range(m):
        need = float(instance.demands[i])
        got = float(flows[i].sum())
        if got < need - FEAS_TOL * max(1.0, need):
            _reject(f"demand_{i}", f"shipped {got:g} of {need:g}")
    for j in range(n):
        shipped = float(flows[:, j].sum())
        if z[j] < shipped - FEAS_TOL * max(1.0, shipped):
            _reject(f"prod_{j}", f"production {z[j]:g} below shipments {shipped:g}")
        for flag, nm in ((l0[j], f"l0_z_{j}"), (l1[j], f"l1_z_{j}")):
            if min(abs(flag), abs(flag - 1.0)) > FEAS_TOL:
                _reject(f"{nm} binary", f"value {flag:g}")
        if abs(lam[j] - (l0[j] + l1[j])) > FEAS_TOL:
            _reject(f"pair_z_{j}", f"lam={lam[j]:g} vs flags {l0[j] + l1[j]:g}")
        if lam[j] > 1.0 + FEAS_TOL:
            _reject(f"lam_{j} <= 1", f"value {lam[j]:g}")
        fac = instance.facilities[j]
        z0 = problem.sterms[j].curve.deflection
        span = max(1.0, fac.capacity)
        if z[j] < z0 * round(l1[j]) - FEAS_TOL * span:
            _reject(f"reglo_z_{j}", f"z={z[j]:g} under deflection with l1 set")
        if z[j] > fac.capacity * round(l1[j]) + z0 * round(l0[j]) + FEAS_TOL * span:
            _reject(f"reghi_z_{j}", f"z={z[j]:g} over the active regime window")

    objective = ioa.evaluate(problem, assignment)
    if solver_objective is not None:
        drift = abs(objective - solver_objective)
        if drift > OBJ_REL_TOL * max(1.0, abs(objective)):
            raise InfeasibleAssignment(
                f"solver objective {solver_objective:g} drifts {drift:g} "
                f"from the recomputed {objective:g}")

    recombined = 0.0
    direct = 0.0
    for j, term in enumerate(problem.sterms):
        pair = split(term.curve)
        zj = min(max(z[j], term.curve.lower), term.curve.effective_upper)
        recombined += round(l0[j]) * pair.cap(zj) + round(l1[j]) * pair.cup(zj)
        if lam[j] > 0.5:
            direct += term.curve.eval(zj)
    if abs(recombined - direct) > AUDIT_REL_TOL * max(1.0, abs(direct)):
        raise InfeasibleAssignment(
            f"regime split recombines to {recombined:g}, "
            f"true production cost is {direct:g}")

    n_e = int(np.sum(l0 > 0.5))
    n_d = int(np.sum(l1 > 0.5))
    return FlpSolution(
        open_flags=(lam > 0.5).astype(int), regime_lo=(l0 > 0.5).astype(int),
        regime_hi=(l1 > 0.5).astype(int), production=z, flows=flows,
        objective=objective, n_e=n_e, n_d=n_d, n_T=n_e + n_d)
