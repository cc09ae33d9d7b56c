"""CPLEX-LP-format export/import plus the external solution-file reader.

The writer emits sections in the fixed order Minimize, Subject To, Bounds,
Binary, General, End, with full-precision coefficients and explicit bounds
for every variable so a round-trip reproduces the model exactly.  The
reader accepts that subset (one row per line) which covers our own output
and hand-written files.  An objective offset travels in a comment the
reader understands; foreign tools simply ignore it.
"""

from __future__ import annotations

import math

from ioaopt.milp.model import MilpModel, ModelError, VarKind


def _num(v: float) -> str:
    return repr(float(v))


def _terms(pairs: list[tuple[str, float]]) -> str:
    parts: list[str] = []
    for name, coef in pairs:
        sign = "-" if coef < 0 else "+"
        if not parts and sign == "+":
            parts.append(f"{_num(coef)} {name}")
        else:
            parts.append(f"{sign} {_num(abs(coef))} {name}")
    return " ".join(parts)


def write_lp(model: MilpModel, path: str) -> None:
    names = [v.name for v in model.variables]
    lines = [f"\\ Model: {model.name}", f"\\ Offset: {_num(model.offset)}", "Minimize"]
    obj_pairs = [(names[j], coef) for j, coef in sorted(model.obj.items()) if coef != 0.0]
    if not obj_pairs and model.variables:
        obj_pairs = [(names[0], 0.0)]
    lines.append(" obj: " + _terms(obj_pairs))
    lines.append("Subject To")
    for row in model.rows:
        if not row.coeffs:
            raise ModelError(f"row {row.name!r} has no terms; cannot export")
        body = _terms([(names[j], coef) for j, coef in row.coeffs])
        lines.append(f" {row.name}: {body} {row.sense} {_num(row.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.lb == v.ub:
            lines.append(f" {v.name} = {_num(v.lb)}")
        elif math.isinf(v.lb) and math.isinf(v.ub):
            lines.append(f" {v.name} free")
        elif math.isinf(v.lb):
            lines.append(f" -inf <= {v.name} <= {_num(v.ub)}")
        elif math.isinf(v.ub):
            lines.append(f" {v.name} >= {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables if v.kind is VarKind.BINARY]
    generals = [v.name for v in model.variables if v.kind is VarKind.INTEGER]
    if binaries:
        lines.append("Binary")
        lines.append(" " + " ".join(binaries))
    if generals:
        lines.append("General")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_SENSES = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def _to_float(tok: str) -> float | None:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity", "1e30", "1e+30"):
        return math.inf
    if t in ("-inf", "-infinity", "-1e30", "-1e+30"):
        return -math.inf
    try:
        return float(tok)
    except ValueError:
        return None


def _parse_terms(tokens: list[str], where: str) -> list[tuple[str, float]]:
    out: list[tuple[str, float]] = []
    sign = 1.0
    coef: float | None = None
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        v = _to_float(tok)
        if v is not None:
            if coef is not None:
                raise ModelError(f"two consecutive numbers in {where}")
            coef = sign * v
            sign = 1.0
            continue
        out.append((tok, (1.0 if coef is None else coef) * (sign if coef is None else 1.0)))
        sign = 1.0
        coef = None
    if coef is not None:
        raise ModelError(f"dangling coefficient in {where}")
    return out


def read_lp(path: str) -> MilpModel:
    with open(path) as fh:
        raw = fh.readlines()

    model_name = "model"
    offset = 0.0
    lines: list[str] = []
    for ln in raw:
        s = ln.strip()
        if s.startswith("\\"):
            body = s[1:].strip()
            if body.lower().startswith("model:"):
                model_name = body.split(":", 1)[1].strip()
            elif body.lower().startswith("offset:"):
                offset = float(body.split(":", 1)[1].strip())
            continue
        if s:
            lines.append(s)

    section = None
    obj_tokens: list[str] = []
    row_specs: list[tuple[str, list[tuple[str, float]], str, float]] = []
    bound_specs: list[tuple[str, float, float]] = []
    binary_names: list[str] = []
    general_names: list[str] = []

    def classify(s: str) -> str | None:
        low = s.lower()
        if low in ("minimize", "maximize", "min", "max"):
            return "objective"
        if low in ("subject to", "such that", "st", "s.t."):
            return "rows"
        if low == "bounds":
            return "bounds"
        if low in ("binary", "binaries", "bin"):
            return "binary"
        if low in ("general", "generals", "gen", "integer", "integers"):
            return "general"
        if low == "end":
            return "end"
        return None

    for line in lines:
        sec = classify(line)
        if sec is not None:
            section = sec
            if section == "end":
                break
            continue
        if section == "objective":
            obj_tokens.extend(_tokenize(line))
        elif section == "rows":
            row_specs.append(_parse_row(line))
        elif section == "bounds":
            bound_specs.append(_parse_bound(line))
        elif section == "binary":
            binary_names.extend(line.split())
        elif section == "general":
            general_names.extend(line.split())
        else:
            raise ModelError(f"content outside any LP section: {line!r}")

    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    elif len(obj_tokens) > 1 and obj_tokens[1] == ":":
        obj_tokens = obj_tokens[2:]
    obj_pairs = _parse_terms(obj_tokens, "objective")

    order: list[str] = []
    seen: set[str] = set()

    def note(name: str) -> None:
        if name not in seen:
            seen.add(name)
            order.append(name)

    for name, _ in obj_pairs:
        note(name)
    for _, pairs, _, _ in row_specs:
        for name, _ in pairs:
            note(name)
    for name, _, _ in bound_specs:
        note(name)
    for name in binary_names + general_names:
        note(name)

    bounds = {name: [0.0, math.inf] for name in order}
    for name, lo, hi in bound_specs:
        bounds[name] = [lo, hi]
    kinds = {name: VarKind.CONTINUOUS for name in order}
    for name in binary_names:
        kinds[name] = VarKind.BINARY
    for name in general_names:
        kinds[name] = VarKind.INTEGER

    model = MilpModel(model_name)
    model.offset = offset
    for name in order:
        lo, hi = bounds[name]
        model.add_var(name, lo, hi, kinds[name])
    for j, coef in ((model.index_of(n), c) for n, c in obj_pairs):
        if coef != 0.0:
            model.obj[j] = model.obj.get(j, 0.0) + coef
    for rname, pairs, sense, rhs in row_specs:
        model.add_row(pairs, sense, rhs, name=rname)
    return model


def _tokenize(line: str) -> list[str]:
    out: list[str] = []
    for chunk in line.replace("<=", " <= ").replace(">=", " >= ").split():
        if chunk not in _SENSES and len(chunk) > 1:
            if chunk.startswith("+") and chunk[1:]:
                out.extend(["+", chunk[1:]])
                continue
            if chunk.startswith("-") and chunk[1:]:
                out.extend(["-", chunk[1:]])
                continue
        out.append(chunk)
    return out


def _parse_row(line: str):
    name = None
    body = line
    if ":" in line:
        name, body = line.split(":", 1)
        name = name.strip()
    tokens = _tokenize(body)
    sense_pos = [i for i, t in enumerate(tokens) if t in _SENSES]
    if len(sense_pos) != 1:
        raise ModelError(f"constraint line needs exactly one relation: {line!r}")
    k = sense_pos[0]
    rhs_tokens = tokens[k + 1:]
    sign = 1.0
    while rhs_tokens and rhs_tokens[0] in ("+", "-"):
        if rhs_tokens[0] == "-":
            sign = -sign
        rhs_tokens = rhs_tokens[1:]
    if len(rhs_tokens) != 1 or _to_float(rhs_tokens[0]) is None:
        raise ModelError(f"constraint rhs must be a single number: {line!r}")
    rhs = sign * _to_float(rhs_tokens[0])
    pairs = _parse_terms(tokens[:k], f"row {name or '?'}")
    return name, pairs, _SENSES[tokens[k]], rhs


def _parse_bound(line: str):
    tokens = _tokenize(line)
    if len(tokens) == 2 and tokens[1].lower() == "free":
        return tokens[0], -math.inf, math.inf
    sense_pos = [i for i, t in enumerate(tokens) if t in _SENSES]
    if len(sense_pos) == 1:
        k = sense_pos[0]
        op = _SENSES[tokens[k]]
        left = _collapse(tokens[:k])
        right = _collapse(tokens[k + 1:])
        lnum, rnum = _to_float(left), _to_float(right)
        if lnum is None and rnum is not None:
            name = left
            if op == "<=":
                return name, 0.0, rnum
            if op == ">=":
                return name, rnum, math.inf
            return name, rnum, rnum
        if lnum is not None and rnum is None:
            name = right
            if op == "<=":
                return name, lnum, math.inf
            if op == ">=":
                return name, 0.0, lnum
            return name, lnum, lnum
        raise ModelError(f"cannot parse bound line: {line!r}")
    if len(sense_pos) == 2:
        a, b = sense_pos
        lo = _to_float(_collapse(tokens[:a]))
        name = _collapse(tokens[a + 1:b])
        hi = _to_float(_collapse(tokens[b + 1:]))
        if lo is None or hi is None or _to_float(name) is not None:
            raise ModelError(f"cannot parse bound line: {line!r}")
        if _SENSES[tokens[a]] != "<=" or _SENSES[tokens[b]] != "<=":
            raise ModelError(f"range bounds must use <=: {line!r}")
        return name, lo, hi
    raise ModelError(f"cannot parse bound line: {line!r}")


def _collapse(tokens: list[str]) -> str:
    if len(tokens) == 2 and tokens[0] in ("+", "-"):
        return tokens[0] + tokens[1] if tokens[0] == "-" else tokens[1]
    if len(tokens) != 1:
        return " ".join(tokens)
    return tokens[0]


def read_solution(path: str) -> dict[str, float]:
    """Parse 'name value' lines; lines starting with '#' are comments."""
    out: dict[str, float] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'name value', got {raw!r}")
            try:
                out[parts[0]] = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad numeric value {parts[1]!r}") from None
    return out
