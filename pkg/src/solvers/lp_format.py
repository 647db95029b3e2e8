# src/solvers/lp_format.py
"""
Debug dump of a MathProgram in CPLEX LP text format.

Coefficients are written with repr() so a dump parses back to the exact
same program. Variable names use only characters LP readers accept.
"""
import math
import re
from pathlib import Path
from typing import Dict, List, Tuple, Union

from src.solvers.program import LinearRow, MathProgram, Sense, VarKind
from src.utils.exceptions import DataParseError
from src.utils.logging_config import logger

_SENSE_TEXT = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
_TEXT_SENSE = {"<=": Sense.LE, ">=": Sense.GE, "=": Sense.EQ}
_SECTIONS = ("minimize", "subject to", "bounds", "binaries", "end")


def _terms(coeffs: Dict[str, float]) -> str:
    if not coeffs:
        return "0 __zero"
    parts = []
    for v, c in coeffs.items():
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {repr(abs(float(c)))} {v}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _bound(value: float) -> str:
    if value == math.inf:
        return "+inf"
    if value == -math.inf:
        return "-inf"
    return repr(float(value))


def write_lp(program: MathProgram) -> str:
    lines = [f"\\ {program.name}", "Minimize"]
    objective = _terms(program.objective)
    if program.objective_constant:
        objective += f" + {repr(program.objective_constant)} __const"
    lines.append(f" obj: {objective}")
    lines.append("Subject To")
    for row in program.rows:
        lines.append(f" {row.name}: {_terms(dict(row.coeffs))} {_SENSE_TEXT[row.sense]} {repr(float(row.rhs))}")
        lines.append(f" \\ kind {row.name} {row.kind}")
    lines.append("Bounds")
    for v in program.variables.values():
        if v.kind is VarKind.BINARY:
            continue
        lines.append(f" {_bound(v.lb)} <= {v.name} <= {_bound(v.ub)}")
    binaries = [v.name for v in program.variables.values() if v.kind is VarKind.BINARY]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    # Declaration order matters for solve determinism
    lines.append("\\ order " + " ".join(program.variable_names()))
    lines.append("End")
    return "\n".join(lines) + "\n"


def save_lp(program: MathProgram, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_lp(program), encoding="utf-8")
    logger.info(f"LP dump of '{program.name}' written to: {path}")
    return path


_TERM = re.compile(r"([+-]?)\s*([0-9.eE+\-]+|inf|nan)\s+([^\s+\-<>=][^\s]*)")


def _parse_terms(text: str) -> Tuple[Dict[str, float], float]:
    coeffs: Dict[str, float] = {}
    constant = 0.0
    text = text.strip()
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None:
            raise DataParseError(f"Cannot parse LP expression near: {text[pos:pos + 40]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        value = sign * float(m.group(2))
        name = m.group(3)
        if name == "__const":
            constant += value
        elif name != "__zero":
            coeffs[name] = coeffs.get(name, 0.0) + value
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return coeffs, constant


def read_lp(text: str) -> MathProgram:
    """Parses text produced by write_lp back into a MathProgram."""
    lines = text.splitlines()
    name = "program"
    if lines and lines[0].startswith("\\ "):
        name = lines[0][2:].strip()
    section = None
    objective: Tuple[Dict[str, float], float] = ({}, 0.0)
    rows: List[Tuple[str, Dict[str, float], Sense, float]] = []
    kinds: Dict[str, str] = {}
    bounds: Dict[str, Tuple[float, float]] = {}
    binaries: List[str] = []
    order: List[str] = []

    for raw in lines[1:]:
        line = raw.strip()
        if not line:
            continue
        if line.lower() in _SECTIONS:
            section = line.lower()
            continue
        if line.startswith("\\ kind "):
            _, _, row_name, kind = line.split(" ", 3)
            kinds[row_name] = kind
            continue
        if line.startswith("\\ order"):
            order = line.split()[2:]
            continue
        if section == "minimize":
            objective = _parse_terms(line.split(":", 1)[1])
        elif section == "subject to":
            row_name, body = line.split(":", 1)
            m = re.match(r"(.*)\s(<=|>=|=)\s(\S+)$", body)
            if m is None:
                raise DataParseError(f"Cannot parse LP row: {line!r}")
            coeffs, constant = _parse_terms(m.group(1))
            rows.append((row_name.strip(), coeffs, _TEXT_SENSE[m.group(2)], float(m.group(3)) - constant))
        elif section == "bounds":
            lo, var, hi = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", line).groups()
            bounds[var] = (float(lo), float(hi))
        elif section == "binaries":
            binaries.append(line)

    program = MathProgram(name)
    binary_set = set(binaries)
    for var in order or list(bounds) + binaries:
        if var in binary_set:
            program.add_variable(var, 0.0, 1.0, VarKind.BINARY)
        else:
            lo, hi = bounds.get(var, (0.0, math.inf))
            program.add_variable(var, lo, hi)
    for row_name, coeffs, sense, rhs in rows:
        program.add_row(LinearRow(row_name, coeffs, sense, rhs, kinds.get(row_name, "generic")))
    program.set_objective(objective[0], objective[1])
    return program
