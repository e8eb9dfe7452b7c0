"""Three-tier safeguard stack: validation, ensemble voting, rule-based fallback.

Tier 1 checks the transformed output against the target schema plus the
mapping-confidence threshold. Tier 2 regenerates the mapping by majority vote
over concurrent model calls and re-runs the route's transform. Tier 3 is a
fully deterministic last resort (name similarity, unit conversion, type and
cardinality coercion, zero-fill) that never fails, so every request gets an
answer.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from typing import Any, Mapping

from .adapter import EvalError, execute_adapter, iso8601_to_epoch, validate_adapter
from .detect import MismatchReport
from .model import (
    Path,
    RouteConfig,
    Schema,
    SchemaNode,
    check_against_schema,
    data_paths,
    is_required_path,
)
from .resolve import (
    ResolutionFailure,
    ResolutionOutcome,
    SchemaMapping,
    FieldMapping,
    generate_adapter,
    generate_mapping,
    transform_direct,
)
from .units import DEFAULT_REGISTRY, UnitRegistry, canonical_unit, convert_unit

__all__ = [
    "EnsembleFailure",
    "SafeguardContext",
    "SafeguardedResult",
    "ValidationResult",
    "convert_unit",
    "ensemble_vote",
    "fallback_transform",
    "run_safeguards",
    "similarity_ratio",
    "validate_output",
]

logger = logging.getLogger(__name__)

SIMILARITY_CUTOFF = 0.6
DEFAULT_ENSEMBLE_SIZE = 3

_ZERO_VALUES: Mapping[str, Any] = {
    "string": "",
    "number": 0.0,
    "integer": 0,
    "boolean": False,
    "null": None,
    "array": [],
    "object": {},
}

_ISO_LIKE = re.compile(r"^\d{4}-\d{2}-\d{2}[Tt ]")


class EnsembleFailure(Exception):
    """Too few valid votes, or the surviving mapping was empty."""


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    violations: tuple[tuple[Path, str], ...] = ()
    confidence_ok: bool = True

    def __post_init__(self):
        if self.valid and self.violations:
            raise ValueError("valid result cannot carry violations")

    @property
    def passed(self) -> bool:
        return self.valid and self.confidence_ok


@dataclass(frozen=True)
class SafeguardedResult:
    output: dict[str, Any]
    tier_used: str  # none | ensemble | fallback
    ensemble_triggered: bool = False
    fallback_triggered: bool = False


def validate_output(output: Any, target: Schema, min_confidence: float,
                    mapping: SchemaMapping | None) -> ValidationResult:
    """Tier 1: schema conformance over the supported subset plus confidence gate."""
    violations = tuple(check_against_schema(output, target))
    confidence_ok = True
    if mapping is not None:
        confidence_ok = mapping.min_confidence() >= min_confidence
    return ValidationResult(
        valid=not violations, violations=violations, confidence_ok=confidence_ok
    )


def similarity_ratio(a: str, b: str) -> float:
    """Gestalt (longest-common-block) similarity in [0, 1]; empty vs empty is 1."""
    return SequenceMatcher(None, a, b).ratio()


def _vote_key(f: FieldMapping) -> tuple[str | None, str]:
    return (str(f.source_path) if f.source_path else None, str(f.target_path))


def ensemble_vote(llm: Any, source: Schema, target: Schema, report: MismatchReport,
                  n: int = DEFAULT_ENSEMBLE_SIZE) -> SchemaMapping:
    """Tier 2: n concurrent mapping generations, majority vote on field pairs.

    A (source_path, target_path) pair survives iff it appears in more than n/2
    of the issued calls; each surviving pair takes transform and confidence
    from its highest-confidence supporting vote.
    """
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    votes: list[SchemaMapping] = []
    failures: list[Exception] = []

    def one_vote() -> SchemaMapping:
        return generate_mapping(llm, source, target, report)

    with ThreadPoolExecutor(max_workers=n) as pool:
        for future in [pool.submit(one_vote) for _ in range(n)]:
            try:
                votes.append(future.result())
            except Exception as exc:
                failures.append(exc)

    quorum = n // 2 + 1  # ceil((n + 1) / 2)
    if len(votes) < quorum:
        raise EnsembleFailure(
            f"only {len(votes)}/{n} valid mapping votes (last failure: "
            f"{failures[-1] if failures else 'none'})"
        )

    counts: dict[tuple[str | None, str], int] = {}
    supporters: dict[tuple[str | None, str], list[FieldMapping]] = {}
    for vote in votes:
        for f in vote.fields:
            key = _vote_key(f)
            counts[key] = counts.get(key, 0) + 1
            supporters.setdefault(key, []).append(f)

    surviving = [key for key, count in counts.items() if count * 2 > n]
    if not surviving:
        raise EnsembleFailure("no field pair reached a majority")

    fields = []
    for key in sorted(surviving, key=lambda k: (k[1], k[0] or "")):
        best = sorted(
            supporters[key], key=lambda f: (-f.confidence, f.transform)
        )[0]
        fields.append(best)
    return SchemaMapping(pair=votes[0].pair, fields=tuple(fields))


# -- rule-based fallback ------------------------------------------------------

_CAMEL_SPLIT = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SEPARATORS = re.compile(r"[\s_\-.]+")

_UNIT_TOKENS = frozenset(
    {"c", "f", "celsius", "fahrenheit", "centigrade", "kmh", "kph", "mph",
     "m", "meters", "metres", "ft", "feet", "percent", "pct"}
)


def _name_tokens(name: str) -> tuple[str, ...]:
    parts: list[str] = []
    for chunk in _SEPARATORS.split(name):
        if chunk:
            parts.extend(p.lower() for p in _CAMEL_SPLIT.split(chunk) if p)
    return tuple(parts)


def _strip_unit_token(tokens: tuple[str, ...]) -> tuple[str, ...]:
    if len(tokens) > 1 and tokens[-1] in _UNIT_TOKENS:
        return tokens[:-1]
    return tokens


def _name_similarity(a: str, b: str) -> float:
    """Best of character-, token-, and tail-token-level gestalt ratios."""
    ta = _strip_unit_token(_name_tokens(a))
    tb = _strip_unit_token(_name_tokens(b))
    if not ta or not tb:
        return similarity_ratio(a.lower(), b.lower())
    char = similarity_ratio("".join(ta), "".join(tb))
    token = SequenceMatcher(None, ta, tb).ratio()
    tail = similarity_ratio(ta[-1], tb[-1])
    return max(char, token, tail)


def _registry_unit_names(units: UnitRegistry) -> frozenset[str]:
    names = set()
    for conv in units.conversions():
        names.add(conv.from_unit)
        names.add(conv.to_unit)
    return frozenset(names)


def _unit_suffix(name: str, extra_units: frozenset[str] = frozenset()) -> str | None:
    tokens = _name_tokens(name)
    if len(tokens) > 1:
        last = tokens[-1]
        if last in _UNIT_TOKENS:
            return canonical_unit(last)
        if last in extra_units:
            return last
    return None


def _slot_unit(path: Path, node: SchemaNode,
               extra_units: frozenset[str] = frozenset()) -> str | None:
    if node.unit_hint:
        return canonical_unit(node.unit_hint) or node.unit_hint
    return _unit_suffix(path.leaf_name, extra_units)


def _flatten_payload(value: Any, prefix: tuple[str, ...] = ()) -> dict[Path, Any]:
    """Assignable values of the payload: scalars and whole arrays, by path."""
    out: dict[Path, Any] = {}
    if isinstance(value, Mapping):
        for name, child in value.items():
            if isinstance(child, Mapping):
                out.update(_flatten_payload(child, prefix + (str(name),)))
            else:
                out[Path(prefix + (str(name),))] = child
    return out


def _zero_value(node: SchemaNode) -> Any:
    if node.enum:
        return node.enum[0]
    return _ZERO_VALUES.get(node.kind, None)


def _coerce_scalar(value: Any, node: SchemaNode) -> Any:
    kind = node.kind
    if kind == "integer":
        if isinstance(value, bool):
            return int(value)
        if isinstance(value, int):
            return value
        if isinstance(value, float):
            return int(value) if value.is_integer() else int(round(value))
        if isinstance(value, str):
            if _ISO_LIKE.match(value):
                try:
                    return iso8601_to_epoch(value)
                except EvalError:
                    return _zero_value(node)
            try:
                return int(value, 10)
            except ValueError:
                try:
                    return int(round(float(value)))
                except ValueError:
                    return _zero_value(node)
        return _zero_value(node)
    if kind == "number":
        if isinstance(value, bool):
            return float(value)
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                return _zero_value(node)
        return _zero_value(node)
    if kind == "string":
        if isinstance(value, str):
            return value
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, float)):
            return repr(value) if isinstance(value, float) else str(value)
        if value is None:
            return _zero_value(node)
        return _zero_value(node)
    if kind == "boolean":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        if isinstance(value, (int, float)) and value in (0, 1):
            return bool(value)
        return _zero_value(node)
    if kind == "null":
        return None
    return _zero_value(node)


def _coerce(value: Any, node: SchemaNode) -> Any:
    if node.kind == "array":
        items = node.items
        assert items is not None
        raw = value if isinstance(value, list) else [value]
        if items.kind in ("object", "array"):
            return [v for v in raw if _matches_kind_loose(v, items.kind)]
        return [_coerce_scalar(v, items) for v in raw]
    if isinstance(value, list):
        value = value[0] if value else _zero_value(node)
    if node.kind == "object":
        return value if isinstance(value, Mapping) else _zero_value(node)
    coerced = _coerce_scalar(value, node)
    if node.enum and not _in_enum(coerced, node.enum):
        return node.enum[0]
    return coerced


def _matches_kind_loose(value: Any, kind: str) -> bool:
    if kind == "object":
        return isinstance(value, Mapping)
    return isinstance(value, list)


def _in_enum(value: Any, enum: tuple[Any, ...]) -> bool:
    return any(
        isinstance(c, bool) == isinstance(value, bool) and c == value for c in enum
    )


def _set_nested(out: dict, path: Path, value: Any) -> None:
    node = out
    for seg in path.segments[:-1]:
        nxt = node.get(seg)
        if not isinstance(nxt, dict):
            nxt = {}
            node[seg] = nxt
        node = nxt
    node[path.segments[-1]] = value


def _zero_fill_required(out: dict, node: SchemaNode) -> None:
    for name in sorted(node.required):
        child = (node.properties or {}).get(name)
        if child is None:
            continue
        if name not in out:
            out[name] = {} if child.kind == "object" else _zero_value(child)
        if child.kind == "object" and isinstance(out.get(name), dict):
            _zero_fill_required(out[name], child)


def fallback_transform(data: Mapping[str, Any], source: Schema, target: Schema,
                       units: UnitRegistry = DEFAULT_REGISTRY,
                       cutoff: float = SIMILARITY_CUTOFF) -> dict[str, Any]:
    """Tier 3: deterministic best-effort transformation; total by contract.

    For each target slot: pick the unused source value with the highest
    normalized-name similarity above the cutoff, convert units when the
    annotated or suffix units differ, coerce to the target kind (including
    ISO 8601 text to epoch integers), fix cardinality, and zero-fill whatever
    required slots remain.
    """
    try:
        payload = _flatten_payload(data if isinstance(data, Mapping) else {})
        slots = data_paths(target)
        source_nodes = data_paths(source)
        known_units = _registry_unit_names(units)

        candidates: list[tuple[float, str, str, Path, Path]] = []
        for t_path in slots:
            for s_path in payload:
                score = _name_similarity(s_path.leaf_name, t_path.leaf_name)
                if score >= cutoff:
                    candidates.append((-score, str(t_path), str(s_path), t_path, s_path))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))

        assigned: dict[Path, Path] = {}
        used_sources: set[Path] = set()
        for _, _, _, t_path, s_path in candidates:
            if t_path in assigned or s_path in used_sources:
                continue
            assigned[t_path] = s_path
            used_sources.add(s_path)

        out: dict[str, Any] = {}
        for t_path, node in slots.items():
            if t_path in assigned:
                s_path = assigned[t_path]
                value = payload[s_path]
                try:
                    s_node = source_nodes.get(s_path)
                    if s_node is not None:
                        s_unit = _slot_unit(s_path, s_node, known_units)
                    else:
                        s_unit = _unit_suffix(s_path.leaf_name, known_units)
                    t_unit = _slot_unit(t_path, node, known_units)
                    if (
                        s_unit and t_unit and s_unit != t_unit
                        and isinstance(value, (int, float)) and not isinstance(value, bool)
                        and units.knows(s_unit, t_unit)
                    ):
                        value = units.convert(float(value), s_unit, t_unit)
                    value = _coerce(value, node)
                except Exception:
                    value = _zero_value(node)
                _set_nested(out, t_path, value)
            elif is_required_path(target, t_path):
                _set_nested(out, t_path, _zero_value(node))
        _zero_fill_required(out, target.root)
        return out
    except Exception:
        logger.exception("fallback transform hit an unexpected error; emitting zero document")
        out = {}
        _zero_fill_required(out, target.root)
        return out


@dataclass
class SafeguardContext:
    route: RouteConfig
    data: Mapping[str, Any]
    report: MismatchReport
    llm: Any
    n: int = DEFAULT_ENSEMBLE_SIZE
    min_confidence: float | None = None
    units: UnitRegistry = field(default_factory=lambda: DEFAULT_REGISTRY)

    @property
    def threshold(self) -> float:
        return self.route.min_confidence if self.min_confidence is None else self.min_confidence


def _retransform(ctx: SafeguardContext, mapping: SchemaMapping) -> dict[str, Any]:
    """Re-run the route's configured strategy with an ensemble-voted mapping."""
    route = ctx.route
    if route.strategy == "CODEGEN":
        program = generate_adapter(ctx.llm, route.source_schema, route.target_schema, mapping)
        validated = validate_adapter(program, route.source_schema, route.target_schema,
                                     sample=ctx.data)
        return execute_adapter(validated, ctx.data)
    return transform_direct(ctx.llm, mapping, ctx.data)


def run_safeguards(outcome: ResolutionOutcome | ResolutionFailure | None,
                   ctx: SafeguardContext) -> SafeguardedResult:
    """Tiers in order; always returns an output (forward progress guarantee)."""
    target = ctx.route.target_schema

    if isinstance(outcome, ResolutionOutcome):
        tier1 = validate_output(outcome.output, target, ctx.threshold, outcome.mapping)
        if tier1.passed:
            return SafeguardedResult(output=outcome.output, tier_used="none")
        logger.info(
            "tier 1 failed on %s (%d violations, confidence_ok=%s); trying ensemble",
            ctx.route.path_pattern, len(tier1.violations), tier1.confidence_ok,
        )

    try:
        voted = ensemble_vote(ctx.llm, ctx.route.source_schema, target, ctx.report, ctx.n)
        output = _retransform(ctx, voted)
        tier1 = validate_output(output, target, ctx.threshold, voted)
        if tier1.passed:
            return SafeguardedResult(output=output, tier_used="ensemble",
                                     ensemble_triggered=True)
        logger.info("ensemble output still invalid on %s; falling back",
                    ctx.route.path_pattern)
    except Exception as exc:
        # totality contract: whatever tier 2 throws, tier 3 still answers
        logger.info("ensemble tier failed on %s: %s", ctx.route.path_pattern, exc)

    output = fallback_transform(ctx.data, ctx.route.source_schema, target, units=ctx.units)
    return SafeguardedResult(output=output, tier_used="fallback",
                             ensemble_triggered=True, fallback_triggered=True)
