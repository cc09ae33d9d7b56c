"""Dense exact MILP layer: model container, bounded-variable simplex,
best-bound branch and bound, LP-format I/O, and solve backends."""

from ioaopt.milp.backends import (BackendError, BuiltinBackend,
                                  ExternalBackend, get_backend)
from ioaopt.milp.bnb import solve_lp, solve_milp
from ioaopt.milp.lpfile import read_lp, read_solution, write_lp
from ioaopt.milp.model import (MilpModel, MilpSolution, ModelError, Status,
                               VarKind)

__all__ = [
    "BackendError", "BuiltinBackend", "ExternalBackend", "get_backend",
    "solve_lp", "solve_milp", "read_lp", "read_solution", "write_lp",
    "MilpModel", "MilpSolution", "ModelError", "Status", "VarKind",
]
