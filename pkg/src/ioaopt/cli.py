"""Command-line surface: solve instances, generate them, run sweeps.

Instance files are JSON with named sections.  Two kinds exist: ``flp``
(meta, facilities, customers, transport, curves) and ``problem`` (a raw
variables/objective/constraints/sterms description).  The layout is
documented in docs/instance-format.md and machine-checked by
docs/instance.schema.json.

Exit codes: 0 solved to gap, 2 stopped with an incumbent (time limit or
stalled), 3 infeasible, 4 unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ioaopt import datagen, flp, ioa, scurve
from ioaopt.milp import BackendError, get_backend

CSV_HEADER = ["instance", "n", "m", "ftype", "cost", "alpha", "theta", "beta",
              "LB", "UB", "gap_pct", "time_s", "iters", "milp_solves",
              "n_e", "n_d", "n_T", "reason"]
TRACE_HEADER = ["iteration", "lb", "ub_iter", "ub_best", "gap_pct",
                "candidates", "inner_iterations", "milp_solves", "cuts",
                "wall_time"]
REASON_LABEL = {"gap": "gap", "fixed_point": "fixed-point",
                "time_limit": "time", "infeasible": "infeasible",
                "numerical": "numerical"}

EXIT_OK = 0
EXIT_INCUMBENT = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 4."""


# ---------------------------------------------------------------- files

def _curve_payload(curve) -> dict:
    return {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
            for k, v in scurve.to_params(curve).items()}


def instance_payload(inst: flp.FlpInstance) -> dict:
    inst.validate()
    return {
        "kind": "flp",
        "meta": {"name": inst.name, "set": inst.set_id, "seed": inst.seed,
                 "ftype": inst.ftype, "cost_structure": inst.structure,
                 "beta": inst.beta},
        "facilities": [{"fixed_cost": float(f.fixed_cost),
                        "capacity": float(f.capacity)}
                       for f in inst.facilities],
        "customers": [float(d) for d in inst.demands],
        "transport": [[float(c) for c in row] for row in inst.transport],
        "curves": [_curve_payload(f.curve) for f in inst.facilities],
    }


def problem_payload(problem: ioa.Problem) -> dict:
    return {
        "kind": "problem",
        "meta": {"name": problem.name},
        "variables": [{"name": v.name, "lb": v.lb, "ub": v.ub,
                       "integer": v.integer} for v in problem.variables],
        "objective": {k: float(v) for k, v in problem.objective.items()},
        "offset": float(problem.offset),
        "constraints": [{"coeffs": {k: float(v) for k, v in r.coeffs.items()},
                         "sense": r.sense, "rhs": float(r.rhs), "name": r.name}
                        for r in problem.constraints],
        "sterms": [{"var": t.var, "switch": t.switch,
                    "curve": _curve_payload(t.curve)} for t in problem.sterms],
    }


def save_instance(obj, path: str | Path) -> Path:
    payload = (instance_payload(obj) if isinstance(obj, flp.FlpInstance)
               else problem_payload(obj))
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def _field(section: dict, key: str, where: str):
    if key not in section:
        raise InputError(f"{where}: missing field {key!r}")
    return section[key]


def load_instance(path: str | Path):
    """Read an instance file; returns ('flp', FlpInstance) or ('problem', Problem)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    kind = payload.get("kind")
    try:
        if kind == "flp":
            return "flp", _parse_flp(payload, str(path))
        if kind == "problem":
            return "problem", _parse_problem(payload, str(path))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, scurve.CurveValidationError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    raise InputError(f"{path}: unknown instance kind {kind!r}")


def _parse_flp(payload: dict, where: str) -> flp.FlpInstance:
    meta = payload.get("meta", {})
    facs = _field(payload, "facilities", where)
    curves = _field(payload, "curves", where)
    if len(curves) != len(facs):
        raise InputError(f"{where}: {len(facs)} facilities but {len(curves)} curves")
    facilities = []
    for raw, cparams in zip(facs, curves):
        curve = scurve.from_params(cparams)
        facilities.append(flp.Facility(
            fixed_cost=float(raw["fixed_cost"]), capacity=float(raw["capacity"]),
            deflection=curve.deflection, curve=curve))
    inst = flp.FlpInstance(
        name=str(meta.get("name", Path(where).stem)),
        facilities=facilities,
        demands=np.array(_field(payload, "customers", where), dtype=float),
        transport=np.array(_field(payload, "transport", where), dtype=float),
        ftype=meta.get("ftype"), structure=meta.get("cost_structure"),
        beta=meta.get("beta"), set_id=meta.get("set"), seed=meta.get("seed"))
    inst.validate()
    return inst


def _parse_problem(payload: dict, where: str) -> ioa.Problem:
    meta = payload.get("meta", {})
    variables = [ioa.VarSpec(v["name"], v.get("lb", 0.0), v.get("ub"),
                             bool(v.get("integer", False)))
                 for v in _field(payload, "variables", where)]
    constraints = [ioa.LinRow(dict(r["coeffs"]), r["sense"], float(r["rhs"]),
                              r.get("name"))
                   for r in payload.get("constraints", [])]
    sterms = [ioa.STerm(t["var"], scurve.from_params(t["curve"]), t.get("switch"))
              for t in payload.get("sterms", [])]
    problem = ioa.Problem(
        name=str(meta.get("name", Path(where).stem)), variables=variables,
        objective={k: float(v) for k, v in payload.get("objective", {}).items()},
        constraints=constraints, sterms=sterms,
        offset=float(payload.get("offset", 0.0)))
    problem.validate()
    return problem


# ---------------------------------------------------------------- reports

@dataclass
class RunReport:
    instance: str
    n: int | None
    m: int | None
    ftype: int | None
    cost: int | None
    alpha: float
    theta: float
    beta: float | None
    lb: float
    ub: float
    time_s: float
    iters: int
    milp_solves: int
    n_e: int | None
    n_d: int | None
    n_T: int | None
    reason: str

    @property
    def gap_pct(self) -> float:
        return ioa.gap_percent(self.lb, self.ub)

    def row(self) -> list[str]:
        def cell(x, fmt=repr):
            return "" if x is None else (fmt(x) if isinstance(x, float) else str(x))
        gp = self.gap_pct
        return [self.instance, cell(self.n), cell(self.m), cell(self.ftype),
                cell(self.cost), cell(self.alpha), cell(self.theta),
                cell(self.beta), cell(self.lb), cell(self.ub),
                "inf" if math.isinf(gp) else f"{gp:.6f}", f"{self.time_s:.3f}",
                str(self.iters), str(self.milp_solves), cell(self.n_e),
                cell(self.n_d), cell(self.n_T), self.reason]


def _exit_code(result: ioa.IoaResult, eps: float) -> int:
    if result.reason == "infeasible":
        return EXIT_INFEASIBLE
    if result.reason == "gap":
        return EXIT_OK
    if result.reason in ("fixed_point", "time_limit"):
        return EXIT_OK if result.gap <= eps else EXIT_INCUMBENT
    return 1


def _write_trace(path: str, trace: list[ioa.TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for t in trace:
            cand = ";".join(f"{k}={v:.9g}" for k, v in sorted(t.candidates.items()))
            w.writerow([t.iteration, repr(t.lb), repr(t.ub_iter), repr(t.ub_best),
                        f"{t.gap_pct:.6f}", cand, t.inner_iterations,
                        t.milp_solves, t.cuts, f"{t.wall_time:.3f}"])


def _solve_instance(kind: str, inst, *, alpha: float, theta: float,
                    beta: float | None, epsilon: float, time_limit: float,
                    backend) -> tuple[RunReport, ioa.IoaResult, ioa.Problem]:
    if kind == "flp":
        problem = flp.build_problem(inst, alpha=alpha, theta=theta, beta=beta)
    else:
        problem = inst
    result = ioa.ioa_solve(problem, eps=epsilon, time_limit=time_limit,
                           backend=backend)
    counts = (None, None, None)
    name = problem.name
    if kind == "flp":
        name = inst.name
        if result.assignment is not None and result.reason != "infeasible":
            sol = flp.summarize(inst, problem, result.assignment, result.objective)
            counts = (sol.n_e, sol.n_d, sol.n_T)
    elif result.assignment is not None and problem.sterms:
        n_e = sum(1 for t in problem.sterms
                  if result.assignment.get(f"l0_{t.var}", 0.0) > 0.5)
        n_d = sum(1 for t in problem.sterms
                  if result.assignment.get(f"l1_{t.var}", 0.0) > 0.5)
        counts = (n_e, n_d, n_e + n_d)
    report = RunReport(
        instance=name,
        n=inst.n if kind == "flp" else None,
        m=inst.m if kind == "flp" else None,
        ftype=inst.ftype if kind == "flp" else None,
        cost=inst.structure if kind == "flp" else None,
        alpha=alpha, theta=theta,
        beta=beta if beta is not None else (inst.beta if kind == "flp" else None),
        lb=result.lb, ub=result.ub, time_s=result.wall_time,
        iters=result.iterations, milp_solves=result.milp_solves,
        n_e=counts[0], n_d=counts[1], n_T=counts[2],
        reason=REASON_LABEL.get(result.reason, result.reason))
    return report, result, problem


def _print_report(report: RunReport, out=sys.stdout) -> None:
    w = csv.writer(out)
    w.writerow(CSV_HEADER)
    w.writerow(report.row())


# ---------------------------------------------------------------- solve

def cmd_solve(args) -> int:
    kind, inst = load_instance(args.instance)
    try:
        backend = get_backend(args.backend)
    except (BackendError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    beta = args.beta
    report, result, problem = _solve_instance(
        kind, inst, alpha=args.alpha, theta=args.theta, beta=beta,
        epsilon=args.epsilon, time_limit=args.time_limit, backend=backend)
    _print_report(report)

    if args.trace:
        _write_trace(args.trace, result.trace)
    sol_path = args.solution or str(Path(args.instance).with_suffix(".sol.json"))
    solution = {
        "instance": report.instance, "status": result.status.value,
        "reason": result.reason, "objective": result.objective,
        "lb": result.lb, "ub": result.ub, "gap_pct": result.gap_pct,
        "iterations": result.iterations, "milp_solves": result.milp_solves,
        "wall_time": result.wall_time, "seed": args.seed,
        "assignment": result.assignment,
    }
    Path(sol_path).write_text(json.dumps(solution, indent=2) + "\n")

    code = _exit_code(result, args.epsilon)
    if args.oracle_check and result.assignment is not None:
        oracle = ioa.oracle_solve(problem, resolution=args.grid,
                                  time_limit=args.time_limit)
        delta = abs(result.objective - oracle.objective)
        tol = max(1e-3 * abs(oracle.objective), oracle.grid_slack)
        ok = oracle.status.value == "optimal" and delta <= tol
        print(f"oracle-agreement: oracle={oracle.objective!r} "
              f"delta={delta:.6g} tol={tol:.6g} {'ok' if ok else 'MISMATCH'}")
        if not ok:
            return 1
    return code


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    try:
        spec = datagen.GenSpec(set_id=args.set, seed=args.seed,
                               ftype=args.ftype, structure=args.cost,
                               n=args.n, m=args.m, beta=args.beta)
        inst = datagen.generate(spec)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = args.output or f"{inst.name}.json"
    save_instance(inst, out)
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------- benchmark

def _bench_worker(task: dict) -> list[str]:
    try:
        spec = datagen.GenSpec(set_id=task["set"], seed=task["seed"],
                               ftype=task["ftype"], structure=task["cost"],
                               n=task["n"], m=task["m"])
        inst = datagen.generate(spec)
        backend = get_backend(task["backend"])
        report, _, _ = _solve_instance(
            "flp", inst, alpha=task["alpha"], theta=task["theta"],
            beta=task["beta"], epsilon=task["epsilon"],
            time_limit=task["time_limit"], backend=backend)
        return report.row()
    except Exception as exc:  # recorded in-row, sweep continues
        name = (f"{task['set']}_t{task['ftype']}c{task['cost']}"
                f"_seed{task['seed']}")
        row = [name, "", "", str(task["ftype"]), str(task["cost"]),
               repr(task["alpha"]), repr(task["theta"]),
               "" if task["beta"] is None else repr(task["beta"])]
        row += [""] * 9 + [f"error: {exc}"]
        return row


def _summary_rows(group_rows: list[list[str]], key: str) -> list[list[str]]:
    numeric = [r for r in group_rows if not r[-1].startswith("error")]
    if not numeric:
        return []
    cols = {}
    for idx, col in enumerate(CSV_HEADER):
        if col in ("LB", "UB", "gap_pct", "time_s", "iters", "milp_solves",
                   "n_e", "n_d", "n_T"):
            vals = [float(r[idx]) for r in numeric if r[idx] not in ("", "inf")]
            cols[idx] = vals
    out = []
    for label, agg in (("Avg", np.mean), ("Min", np.min), ("Max", np.max)):
        row = [f"{label}:{key}"] + [""] * (len(CSV_HEADER) - 1)
        for idx, vals in cols.items():
            if vals:
                row[idx] = repr(float(agg(vals)))
        row[-1] = f"{label.lower()} of {len(numeric)} runs"
        out.append(row)
    return out


def _csv_list(text: str, cast):
    try:
        return [cast(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise InputError(f"bad list {text!r}: {exc}") from exc


def cmd_benchmark(args) -> int:
    sets = [s.strip() for s in args.set.split(",")]
    ftypes = _csv_list(args.ftype, int)
    costs = _csv_list(args.cost, int)
    seeds = _csv_list(args.seeds, int)
    alphas = _csv_list(args.alpha, float)
    thetas = _csv_list(args.theta, float)
    betas = [None] if args.beta is None else _csv_list(args.beta, float)
    tasks = []
    for sid in sets:
        for ft in ftypes:
            for cs in costs:
                for al in alphas:
                    for th in thetas:
                        for be in betas:
                            for seed in seeds:
                                tasks.append({
                                    "set": sid, "ftype": ft, "cost": cs,
                                    "alpha": al, "theta": th, "beta": be,
                                    "seed": seed, "n": args.n, "m": args.m,
                                    "epsilon": args.epsilon,
                                    "time_limit": args.time_limit,
                                    "backend": args.backend})
    if not tasks:
        raise InputError("benchmark matrix is empty")

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_worker, tasks))
    else:
        rows = [_bench_worker(t) for t in tasks]

    per_seed = len(seeds)
    out_rows = []
    for base in range(0, len(rows), per_seed):
        group = rows[base:base + per_seed]
        t = tasks[base]
        key = f"{t['set']}_t{t['ftype']}c{t['cost']}_a{t['alpha']}h{t['theta']}"
        if t["beta"] is not None:
            key += f"b{t['beta']}"
        out_rows.extend(group)
        out_rows.extend(_summary_rows(group, key))

    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        w.writerows(out_rows)
    print(args.output)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ioaopt",
        description="Exact solver for problems with inverse-S-shaped costs")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--epsilon", type=float, default=ioa.DEFAULT_EPS)
    s.add_argument("--time-limit", type=float, default=ioa.DEFAULT_TIME_LIMIT)
    s.add_argument("--backend", default="builtin")
    s.add_argument("--seed", type=int, default=None,
                   help="recorded in the solution file; the solver is deterministic")
    s.add_argument("--trace", default=None, help="per-iteration CSV path")
    s.add_argument("--solution", default=None, help="solution JSON path")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--theta", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=None)
    s.add_argument("--oracle-check", action="store_true")
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="write a synthetic instance file")
    g.add_argument("--set", required=True, choices=sorted(datagen.SET_DEFAULTS))
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--ftype", type=int, default=1, choices=(1, 2, 3))
    g.add_argument("--cost", type=int, default=1, choices=(1, 2, 3, 4))
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--output", "-o", default=None)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("benchmark", help="sweep a matrix of generated instances")
    b.add_argument("--set", default="1a")
    b.add_argument("--ftype", default="1")
    b.add_argument("--cost", default="1")
    b.add_argument("--seeds", default="1,2,3")
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--m", type=int, default=None)
    b.add_argument("--alpha", default="1")
    b.add_argument("--theta", default="1")
    b.add_argument("--beta", default=None)
    b.add_argument("--epsilon", type=float, default=ioa.DEFAULT_EPS)
    b.add_argument("--time-limit", type=float, default=ioa.DEFAULT_TIME_LIMIT)
    b.add_argument("--backend", default="builtin")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--output", "-o", default="report.csv")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
