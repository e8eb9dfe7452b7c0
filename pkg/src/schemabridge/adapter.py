"""Sandboxed transformation programs: a whitelisted expression language.

A program is an ordered list of (target path := expression) assignments over
the source payload. Expressions are trees of Get / Const / Arith / Call nodes;
the only callables are the fixed whitelist below. No recursion, no loops, no
attribute access, no side effects: programs are data, and the interpreter is
the sandbox.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Mapping

from .model import HashPair, Path, Schema, check_against_schema, data_paths, hash_pair
from . import units

ARITH_OPS = ("+", "-", "*", "/")

JsonScalar = (str, int, float, bool, type(None))


class StaticViolation(ValueError):
    """Program failed static validation; message names the offending expression."""


class TrialFailure(ValueError):
    """Trial execution errored or produced schema-invalid output."""


class EvalError(ValueError):
    """Runtime failure while interpreting a program."""


class AdapterDecodeError(ValueError):
    """Serialized program does not follow the wire format."""


@dataclass(frozen=True)
class Get:
    path: Path

    def render(self) -> str:
        return f"Get({self.path})"


@dataclass(frozen=True)
class Const:
    value: Any

    def render(self) -> str:
        return f"Const({json.dumps(self.value)})"


@dataclass(frozen=True)
class Arith:
    op: str
    lhs: "Expr"
    rhs: "Expr"

    def render(self) -> str:
        return f"({self.lhs.render()} {self.op} {self.rhs.render()})"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]

    def render(self) -> str:
        return f"{self.fn}({', '.join(a.render() for a in self.args)})"


Expr = Get | Const | Arith | Call


@dataclass(frozen=True)
class Assignment:
    target: Path
    expr: Expr

    def render(self) -> str:
        return f"{self.target} := {self.expr.render()}"


@dataclass(frozen=True)
class AdapterProgram:
    assignments: tuple[Assignment, ...]


@dataclass(frozen=True)
class ValidatedAdapter:
    """Proof token: the wrapped program passed static and trial validation."""

    program: AdapterProgram
    pair: HashPair


def _need_number(value: Any, ctx: str) -> float | int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EvalError(f"{ctx}: expected a number, got {value!r}")
    return value


def _need_string(value: Any, ctx: str) -> str:
    if not isinstance(value, str):
        raise EvalError(f"{ctx}: expected a string, got {value!r}")
    return value


def _need_array(value: Any, ctx: str) -> list:
    if not isinstance(value, list):
        raise EvalError(f"{ctx}: expected an array, got {value!r}")
    return value


def _fn_to_float(x: Any) -> float:
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError as exc:
            raise EvalError(f"to_float: cannot parse {x!r}") from exc
    return float(_need_number(x, "to_float"))


def _fn_to_int(x: Any) -> int:
    if isinstance(x, str):
        try:
            return int(x, 10)
        except ValueError:
            try:
                return int(float(x))
            except ValueError as exc:
                raise EvalError(f"to_int: cannot parse {x!r}") from exc
    return int(_need_number(x, "to_int"))


def _fn_to_string(x: Any) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, JsonScalar):
        return json.dumps(x)
    raise EvalError(f"to_string: expected a scalar, got {x!r}")


def _fn_round(x: Any, digits: Any) -> float | int:
    if isinstance(digits, bool) or not isinstance(digits, int):
        raise EvalError(f"round: digits must be an integer, got {digits!r}")
    return round(_need_number(x, "round"), digits)


def iso8601_to_epoch(text: Any) -> int:
    """ISO 8601 text (trailing Z or numeric offset; naive treated as UTC) -> epoch seconds."""
    raw = _need_string(text, "iso8601_to_epoch").strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise EvalError(f"iso8601_to_epoch: cannot parse {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def epoch_to_iso8601(value: Any) -> str:
    seconds = _need_number(value, "epoch_to_iso8601")
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return dt.isoformat().replace("+00:00", "Z")


def _fn_first(x: Any) -> Any:
    arr = _need_array(x, "first")
    if not arr:
        raise EvalError("first: empty array")
    return arr[0]


def _fn_mean(x: Any) -> float:
    arr = _need_array(x, "mean")
    if not arr:
        raise EvalError("mean: empty array")
    return float(statistics.fmean(_need_number(v, "mean") for v in arr))


def _fn_min(x: Any) -> float | int:
    arr = _need_array(x, "min")
    if not arr:
        raise EvalError("min: empty array")
    return min(_need_number(v, "min") for v in arr)


def _fn_max(x: Any) -> float | int:
    arr = _need_array(x, "max")
    if not arr:
        raise EvalError("max: empty array")
    return max(_need_number(v, "max") for v in arr)


def _fn_concat(*parts: Any) -> str:
    return "".join(_need_string(p, "concat") for p in parts)


# fn name -> (implementation, min arity, max arity or None for variadic)
FUNCTION_WHITELIST: Mapping[str, tuple[Callable[..., Any], int, int | None]] = {
    "to_float": (_fn_to_float, 1, 1),
    "to_int": (_fn_to_int, 1, 1),
    "to_string": (_fn_to_string, 1, 1),
    "round": (_fn_round, 2, 2),
    "celsius_to_fahrenheit": (lambda x: units.celsius_to_fahrenheit(_need_number(x, "celsius_to_fahrenheit")), 1, 1),
    "fahrenheit_to_celsius": (lambda x: units.fahrenheit_to_celsius(_need_number(x, "fahrenheit_to_celsius")), 1, 1),
    "kmh_to_mph": (lambda x: units.kmh_to_mph(_need_number(x, "kmh_to_mph")), 1, 1),
    "mph_to_kmh": (lambda x: units.mph_to_kmh(_need_number(x, "mph_to_kmh")), 1, 1),
    "m_to_ft": (lambda x: units.m_to_ft(_need_number(x, "m_to_ft")), 1, 1),
    "ft_to_m": (lambda x: units.ft_to_m(_need_number(x, "ft_to_m")), 1, 1),
    "iso8601_to_epoch": (iso8601_to_epoch, 1, 1),
    "epoch_to_iso8601": (epoch_to_iso8601, 1, 1),
    "first": (_fn_first, 1, 1),
    "wrap_array": (lambda x: [x], 1, 1),
    "mean": (_fn_mean, 1, 1),
    "min": (_fn_min, 1, 1),
    "max": (_fn_max, 1, 1),
    "lower": (lambda x: _need_string(x, "lower").lower(), 1, 1),
    "upper": (lambda x: _need_string(x, "upper").upper(), 1, 1),
    "concat": (_fn_concat, 2, None),
}


def _lookup(data: Any, path: Path) -> Any:
    value = data
    for seg in path.segments:
        if not isinstance(value, Mapping) or seg not in value:
            raise EvalError(f"Get({path}): path not present in payload")
        value = value[seg]
    return value


def _eval(expr: Expr, data: Mapping[str, Any]) -> Any:
    if isinstance(expr, Get):
        return _lookup(data, expr.path)
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Arith):
        lhs = _need_number(_eval(expr.lhs, data), expr.render())
        rhs = _need_number(_eval(expr.rhs, data), expr.render())
        try:
            if expr.op == "+":
                return lhs + rhs
            if expr.op == "-":
                return lhs - rhs
            if expr.op == "*":
                return lhs * rhs
            return lhs / rhs
        except ZeroDivisionError as exc:
            raise EvalError(f"{expr.render()}: division by zero") from exc
    if isinstance(expr, Call):
        try:
            fn, _, _ = FUNCTION_WHITELIST[expr.fn]
        except KeyError:
            raise EvalError(f"{expr.render()}: function not whitelisted") from None
        return fn(*(_eval(a, data) for a in expr.args))
    raise EvalError(f"unknown expression node {expr!r}")


def evaluate_expr(expr: Expr, data: Mapping[str, Any]) -> Any:
    """Evaluate one expression against a payload; raises EvalError on bad input."""
    return _eval(expr, data)


def _set_path(out: dict, path: Path, value: Any) -> None:
    node = out
    for seg in path.segments[:-1]:
        node = node.setdefault(seg, {})
        if not isinstance(node, dict):
            raise EvalError(f"assignment to {path}: intermediate value is not an object")
    node[path.segments[-1]] = value


def execute_adapter(program: AdapterProgram | ValidatedAdapter, data: Mapping[str, Any]) -> dict:
    """Interpret the program over the payload; pure, deterministic, no model calls."""
    if isinstance(program, ValidatedAdapter):
        program = program.program
    if not isinstance(data, Mapping):
        raise EvalError("payload must be a JSON object")
    out: dict[str, Any] = {}
    for assignment in program.assignments:
        _set_path(out, assignment.target, _eval(assignment.expr, data))
    return out


def _check_expr(expr: Any, source_paths: Mapping[Path, Any], assignment: Assignment) -> None:
    if isinstance(expr, Get):
        if expr.path not in source_paths:
            raise StaticViolation(
                f"{assignment.render()}: {expr.render()} addresses no source value"
            )
    elif isinstance(expr, Const):
        if not isinstance(expr.value, JsonScalar):
            raise StaticViolation(
                f"{assignment.render()}: {expr.render()} is not a JSON scalar"
            )
    elif isinstance(expr, Arith):
        if expr.op not in ARITH_OPS:
            raise StaticViolation(f"{assignment.render()}: unknown operator {expr.op!r}")
        _check_expr(expr.lhs, source_paths, assignment)
        _check_expr(expr.rhs, source_paths, assignment)
    elif isinstance(expr, Call):
        entry = FUNCTION_WHITELIST.get(expr.fn)
        if entry is None:
            raise StaticViolation(
                f"{assignment.render()}: function {expr.fn!r} is not whitelisted"
            )
        _, lo, hi = entry
        if len(expr.args) < lo or (hi is not None and len(expr.args) > hi):
            raise StaticViolation(
                f"{assignment.render()}: {expr.fn} called with {len(expr.args)} args"
            )
        for arg in expr.args:
            _check_expr(arg, source_paths, assignment)
    else:
        raise StaticViolation(f"{assignment.render()}: unknown node {expr!r}")


def check_static(program: AdapterProgram, source: Schema, target: Schema) -> None:
    """Whitelist, arity, and path-existence checks; raises StaticViolation."""
    source_paths = data_paths(source)
    target_paths = data_paths(target)
    seen_targets: set[Path] = set()
    for assignment in program.assignments:
        if assignment.target not in target_paths:
            raise StaticViolation(
                f"{assignment.render()}: target addresses no value of the target schema"
            )
        if assignment.target in seen_targets:
            raise StaticViolation(f"{assignment.render()}: duplicate target")
        seen_targets.add(assignment.target)
        _check_expr(assignment.expr, source_paths, assignment)


def validate_adapter(program: AdapterProgram, source: Schema, target: Schema,
                     sample: Mapping[str, Any]) -> ValidatedAdapter:
    """Static checks plus one trial run whose output must satisfy the target schema."""
    check_static(program, source, target)
    try:
        trial = execute_adapter(program, sample)
    except EvalError as exc:
        raise TrialFailure(f"trial execution failed: {exc}") from exc
    violations = check_against_schema(trial, target)
    if violations:
        rendered = "; ".join(f"{path}: {reason}" for path, reason in violations[:5])
        raise TrialFailure(f"trial output violates target schema: {rendered}")
    return ValidatedAdapter(program=program, pair=hash_pair(source, target))


# wire format: {"assignments": [{"target": "dotted.path", "expr": <node>}]}
# node: {"kind": "get", "path": ...} | {"kind": "const", "value": ...}
#     | {"kind": "arith", "op": ..., "left": ..., "right": ...}
#     | {"kind": "call", "fn": ..., "args": [...]}

def expr_to_json(expr: Expr) -> dict[str, Any]:
    if isinstance(expr, Get):
        return {"kind": "get", "path": str(expr.path)}
    if isinstance(expr, Const):
        return {"kind": "const", "value": expr.value}
    if isinstance(expr, Arith):
        return {
            "kind": "arith",
            "op": expr.op,
            "left": expr_to_json(expr.lhs),
            "right": expr_to_json(expr.rhs),
        }
    if isinstance(expr, Call):
        return {"kind": "call", "fn": expr.fn, "args": [expr_to_json(a) for a in expr.args]}
    raise AdapterDecodeError(f"unknown expression node {expr!r}")


def expr_from_json(doc: Any) -> Expr:
    if not isinstance(doc, Mapping) or "kind" not in doc:
        raise AdapterDecodeError(f"expression node must be a tagged object: {doc!r}")
    kind = doc["kind"]
    if kind == "get":
        try:
            return Get(Path.parse(str(doc["path"])))
        except (KeyError, ValueError) as exc:
            raise AdapterDecodeError(f"bad get node: {doc!r}") from exc
    if kind == "const":
        if "value" not in doc or not isinstance(doc["value"], JsonScalar):
            raise AdapterDecodeError(f"bad const node: {doc!r}")
        return Const(doc["value"])
    if kind == "arith":
        op = doc.get("op")
        if op not in ARITH_OPS or "left" not in doc or "right" not in doc:
            raise AdapterDecodeError(f"bad arith node: {doc!r}")
        return Arith(op, expr_from_json(doc["left"]), expr_from_json(doc["right"]))
    if kind == "call":
        fn = doc.get("fn")
        args = doc.get("args")
        if not isinstance(fn, str) or not isinstance(args, list):
            raise AdapterDecodeError(f"bad call node: {doc!r}")
        return Call(fn, tuple(expr_from_json(a) for a in args))
    raise AdapterDecodeError(f"unknown node kind {kind!r}")


def program_to_json(program: AdapterProgram) -> dict[str, Any]:
    return {
        "assignments": [
            {"target": str(a.target), "expr": expr_to_json(a.expr)}
            for a in program.assignments
        ]
    }


def program_from_json(doc: Any) -> AdapterProgram:
    if not isinstance(doc, Mapping) or not isinstance(doc.get("assignments"), list):
        raise AdapterDecodeError("program must be an object with an \"assignments\" list")
    assignments = []
    for raw in doc["assignments"]:
        if not isinstance(raw, Mapping) or "target" not in raw or "expr" not in raw:
            raise AdapterDecodeError(f"bad assignment: {raw!r}")
        try:
            target = Path.parse(str(raw["target"]))
        except ValueError as exc:
            raise AdapterDecodeError(f"bad assignment target: {raw['target']!r}") from exc
        assignments.append(Assignment(target=target, expr=expr_from_json(raw["expr"])))
    return AdapterProgram(assignments=tuple(assignments))
