"""Pluggable MILP solve backends.

``BuiltinBackend`` runs the in-package branch and bound.  ``ExternalBackend``
shells out to any solver reachable as ``<command> <model.lp> <out.sol>``,
then reloads the reported point, checks it against the model, and recomputes
the objective locally so a misbehaving solver surfaces as an error instead
of a silently wrong answer.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np

from ioaopt.milp.bnb import solve_milp
from ioaopt.milp.lpfile import read_solution, write_lp
from ioaopt.milp.model import MilpModel, MilpSolution, Status

FEAS_CHECK_TOL = 1e-6


class BackendError(RuntimeError):
    pass


class BuiltinBackend:
    name = "builtin"

    def solve(self, model: MilpModel, time_limit: float | None = None,
              gap_tol: float = 1e-9, incumbent=None,
              heuristic=None, groups=None) -> MilpSolution:
        return solve_milp(model, time_limit=time_limit, gap_tol=gap_tol,
                          incumbent=incumbent, heuristic=heuristic,
                          groups=groups)


class ExternalBackend:
    """Adapter for a command-line solver taking an LP file and writing a
    solution file of 'name value' lines."""

    def __init__(self, command: str):
        if not command.strip():
            raise BackendError("external backend needs a non-empty command")
        self.command = command
        self.name = f"external:{command}"

    def solve(self, model: MilpModel, time_limit: float | None = None,
              gap_tol: float = 1e-9, incumbent=None,
              heuristic=None, groups=None) -> MilpSolution:
        # warm starts, node callbacks and branching hints have no portable
        # file encoding; external runs go cold
        start = time.monotonic()
        with tempfile.TemporaryDirectory(prefix="milp_ext_") as tmp:
            lp_path = str(Path(tmp) / "model.lp")
            sol_path = str(Path(tmp) / "model.sol")
            write_lp(model, lp_path)
            argv = shlex.split(self.command) + [lp_path, sol_path]
            try:
                proc = subprocess.run(
                    argv, capture_output=True, text=True, timeout=time_limit)
            except FileNotFoundError as exc:
                raise BackendError(f"cannot launch solver: {exc}") from exc
            except subprocess.TimeoutExpired:
                return MilpSolution(Status.TIME_LIMIT, math.inf,
                                    np.zeros(len(model.variables)), -math.inf,
                                    wall_time=time.monotonic() - start)
            if proc.returncode != 0:
                tail = (proc.stderr or proc.stdout or "").strip()[-400:]
                raise BackendError(
                    f"solver exited with code {proc.returncode}: {tail}")
            if not Path(sol_path).exists():
                raise BackendError("solver wrote no solution file")
            values = read_solution(sol_path)
        x = self._vector(model, values)
        self._check(model, x)
        obj = model.objective_value(x)
        return MilpSolution(Status.OPTIMAL, obj, x, obj,
                            wall_time=time.monotonic() - start)

    @staticmethod
    def _vector(model: MilpModel, values: dict[str, float]) -> np.ndarray:
        known = {v.name for v in model.variables}
        stray = sorted(set(values) - known)
        if stray:
            raise BackendError(f"solution names unknown variables: {stray[:5]}")
        x = np.empty(len(model.variables))
        for j, v in enumerate(model.variables):
            # absent names default to the bound closest to zero
            val = values.get(v.name, min(max(0.0, v.lb), v.ub))
            x[j] = val
        return x

    @staticmethod
    def _check(model: MilpModel, x: np.ndarray) -> None:
        for j, v in enumerate(model.variables):
            scale = max(1.0, abs(v.lb) if math.isfinite(v.lb) else 0.0,
                        abs(v.ub) if math.isfinite(v.ub) else 0.0)
            if x[j] < v.lb - FEAS_CHECK_TOL * scale or x[j] > v.ub + FEAS_CHECK_TOL * scale:
                raise BackendError(f"variable {v.name} out of bounds: {x[j]}")
        for j in model.integer_indices():
            if abs(x[j] - round(x[j])) > FEAS_CHECK_TOL:
                name = model.variables[j].name
                raise BackendError(f"variable {name} not integral: {x[j]}")
        worst = model.max_violation(x)
        if worst > FEAS_CHECK_TOL:
            raise BackendError(f"solution violates the model by {worst:.3e}")


def get_backend(spec: str):
    """Map 'builtin' or 'external:CMD' to a backend instance."""
    if spec == "builtin":
        return BuiltinBackend()
    if spec.startswith("external:"):
        return ExternalBackend(spec[len("external:"):])
    raise BackendError(f"unknown backend spec {spec!r}; "
                       "use 'builtin' or 'external:CMD'")
