"""Backend-neutral mixed-integer linear model container."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ModelError(ValueError):
    """Raised for malformed models: bad names, unknown refs, non-finite data."""


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"
    NUMERICAL = "numerical"


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    kind: VarKind


@dataclass
class Row:
    coeffs: list[tuple[int, float]]
    sense: str
    rhs: float
    name: str


@dataclass
class MilpSolution:
    """Solver outcome: assignment is empty unless an incumbent exists."""

    status: Status
    objective: float
    x: np.ndarray
    best_bound: float
    node_count: int = 0
    wall_time: float = 0.0
    events: list = field(default_factory=list)

    def value(self, model: "MilpModel", name: str) -> float:
        return float(self.x[model.index_of(name)])


class MilpModel:
    """Minimization model: variables with bounds, linear rows, linear objective."""

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[Variable] = []
        self.rows: list[Row] = []
        self.obj: dict[int, float] = {}
        self.offset: float = 0.0
        self._index: dict[str, int] = {}

    # -- construction -------------------------------------------------

    def add_var(
        self,
        name: str,
        lb: float | None = 0.0,
        ub: float | None = math.inf,
        kind: VarKind | str = VarKind.CONTINUOUS,
        obj: float = 0.0,
    ) -> int:
        kind = VarKind(kind)
        lb = -math.inf if lb is None else lb
        ub = math.inf if ub is None else ub
        if not _NAME_RE.match(name):
            raise ModelError(f"variable name {name!r} is not LP-file safe")
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind is VarKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ModelError(f"bad bounds [{lb}, {ub}] for {name!r}")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        self._index[name] = idx
        if obj:
            self.obj[idx] = float(obj)
        return idx

    def index_of(self, ref: int | str) -> int:
        if isinstance(ref, str):
            try:
                return self._index[ref]
            except KeyError:
                raise ModelError(f"unknown variable {ref!r}") from None
        if not 0 <= ref < len(self.variables):
            raise ModelError(f"variable index {ref} out of range")
        return ref

    def add_row(self, coeffs, sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in ("<=", ">=", "="):
            raise ModelError(f"bad row sense {sense!r}")
        if not math.isfinite(rhs):
            raise ModelError(f"row rhs must be finite, got {rhs}")
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        merged: dict[int, float] = {}
        for ref, coef in items:
            coef = float(coef)
            if not math.isfinite(coef):
                raise ModelError(f"non-finite coefficient for {ref!r}")
            if coef != 0.0:
                j = self.index_of(ref)
                merged[j] = merged.get(j, 0.0) + coef
        rid = len(self.rows)
        self.rows.append(Row(sorted(merged.items()), sense, float(rhs), name or f"c{rid}"))
        return rid

    def add_objective(self, coeffs) -> None:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        for ref, coef in items:
            j = self.index_of(ref)
            self.obj[j] = self.obj.get(j, 0.0) + float(coef)

    # -- array view ----------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def integer_indices(self) -> list[int]:
        return [
            i for i, v in enumerate(self.variables)
            if v.kind in (VarKind.BINARY, VarKind.INTEGER)
        ]

    def to_arrays(self):
        n = self.num_vars
        m = len(self.rows)
        c = np.zeros(n)
        for j, coef in self.obj.items():
            c[j] = coef
        a = np.zeros((m, n))
        b = np.zeros(m)
        senses = []
        for i, row in enumerate(self.rows):
            for j, coef in row.coeffs:
                a[i, j] += coef
            b[i] = row.rhs
            senses.append(row.sense)
        lb = np.array([v.lb for v in self.variables]) if n else np.zeros(0)
        ub = np.array([v.ub for v in self.variables]) if n else np.zeros(0)
        return c, a, senses, b, lb, ub

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(coef * x[j] for j, coef in self.obj.items()) + self.offset)

    def assignment(self, x: np.ndarray) -> dict[str, float]:
        return {v.name: float(x[i]) for i, v in enumerate(self.variables)}

    def row_activity(self, x: np.ndarray, row: Row) -> float:
        return float(sum(coef * x[j] for j, coef in row.coeffs))

    def max_violation(self, x: np.ndarray) -> float:
        """Worst bound or row violation, rows measured relative to their scale."""
        worst = 0.0
        for i, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[i], x[i] - v.ub)
        for row in self.rows:
            scale = max(1.0, abs(row.rhs), *(abs(c) for _, c in row.coeffs)) if row.coeffs else 1.0
            act = self.row_activity(x, row)
            if row.sense == "<=":
                worst = max(worst, (act - row.rhs) / scale)
            elif row.sense == ">=":
                worst = max(worst, (row.rhs - act) / scale)
            else:
                worst = max(worst, abs(act - row.rhs) / scale)
        return worst
