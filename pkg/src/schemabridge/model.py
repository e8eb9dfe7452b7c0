"""Schema representation, canonical hashing, route registry, and path utilities.

Schemas are a deliberately small JSON Schema (Draft 2020-12) subset: type,
properties, required, items, enum, plus annotation hints (unit, format).
Anything else is parsed-and-ignored with a warning; the same subset backs the
output validator, so detection, transformation, and validation all agree on
what a schema means.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Iterator, Mapping

from .units import UnitConversion, canonical_unit

logger = logging.getLogger(__name__)

SCALAR_KINDS = frozenset({"string", "number", "integer", "boolean", "null"})
KINDS = SCALAR_KINDS | {"object", "array"}

SUPPORTED_KEYWORDS = frozenset(
    {"type", "properties", "required", "items", "enum", "x-unit", "format",
     "description", "title"}
)

TRANSFORMABLE_METHODS = frozenset({"POST", "PUT", "PATCH"})
STRATEGIES = frozenset({"DIRECT", "CODEGEN"})

ARRAY_ITEM = "[]"


class MalformedSchema(ValueError):
    """Schema text is not valid JSON, or violates the subset's invariants."""


class UnsupportedKind(MalformedSchema):
    """The schema declares a "type" outside the supported kinds."""


class ConfigError(ValueError):
    """Registry config document is invalid; message names the offending route."""


@dataclass(frozen=True)
class Path:
    """Dotted path to a value; array items appear as a '[]' marker segment."""

    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("empty path")

    def render(self) -> str:
        out = ""
        for seg in self.segments:
            if seg == ARRAY_ITEM:
                out += ARRAY_ITEM
            else:
                out = seg if not out else f"{out}.{seg}"
        return out

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "Path":
        if not text:
            raise ValueError("empty path text")
        segments: list[str] = []
        for part in text.split("."):
            markers = 0
            while part.endswith(ARRAY_ITEM):
                part = part[: -len(ARRAY_ITEM)]
                markers += 1
            if part:
                segments.append(part)
            elif markers == 0:
                raise ValueError(f"malformed path text: {text!r}")
            segments.extend([ARRAY_ITEM] * markers)
        return cls(tuple(segments))

    @property
    def leaf_name(self) -> str:
        """Final non-marker segment (the field's own name)."""
        for seg in reversed(self.segments):
            if seg != ARRAY_ITEM:
                return seg
        return ARRAY_ITEM

    def without_markers(self) -> tuple[str, ...]:
        return tuple(s for s in self.segments if s != ARRAY_ITEM)

    def child(self, segment: str) -> "Path":
        return Path(self.segments + (segment,))


@dataclass(frozen=True, eq=True)
class SchemaNode:
    """One node of the parsed schema tree."""

    kind: str
    properties: Mapping[str, "SchemaNode"] | None = None
    required: frozenset[str] = frozenset()
    items: "SchemaNode | None" = None
    enum: tuple[Any, ...] | None = None
    unit_hint: str | None = None
    format_hint: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedKind(f"unknown type {self.kind!r}")
        if self.kind == "object" and self.properties is None:
            raise MalformedSchema("object node without properties")
        if self.kind == "array" and self.items is None:
            raise MalformedSchema("array node without items")
        if self.kind not in ("object", "array") and (
            self.properties is not None or self.items is not None
        ):
            raise MalformedSchema(f"scalar node {self.kind!r} with children")
        missing = self.required - set(self.properties or {})
        if missing:
            raise MalformedSchema(f"required names absent from properties: {sorted(missing)}")


@dataclass(frozen=True, eq=True)
class Schema:
    """Parsed schema plus its canonical text form (hash input)."""

    root: SchemaNode
    raw: str
    ignored_keywords: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SchemaHash:
    """SHA-256 over the canonical schema text."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValueError("digest must be 32 bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __repr__(self) -> str:
        return f"SchemaHash({self.hex[:12]})"


HashPair = tuple[SchemaHash, SchemaHash]


def _extract_unit_hint(obj: Mapping[str, Any]) -> str | None:
    explicit = obj.get("x-unit")
    if isinstance(explicit, str) and explicit:
        return canonical_unit(explicit) or explicit.strip().lower()
    description = obj.get("description")
    if isinstance(description, str):
        # whitespace-split so compound spellings like "km/h" stay whole
        for token in description.split():
            unit = canonical_unit(token)
            if unit:
                return unit
    return None


def _parse_node(obj: Any, where: str, ignored: set[str]) -> SchemaNode:
    if not isinstance(obj, Mapping):
        raise MalformedSchema(f"{where}: schema node must be an object")
    for key in obj:
        if key not in SUPPORTED_KEYWORDS:
            ignored.add(key)
    kind = obj.get("type")
    if kind is None:
        raise MalformedSchema(f"{where}: missing \"type\"")
    if not isinstance(kind, str) or kind not in KINDS:
        raise UnsupportedKind(f"{where}: unknown type {kind!r}")

    properties = None
    required: frozenset[str] = frozenset()
    items = None
    if kind == "object":
        raw_props = obj.get("properties", {})
        if not isinstance(raw_props, Mapping):
            raise MalformedSchema(f"{where}: properties must be an object")
        properties = {
            name: _parse_node(child, f"{where}.{name}", ignored)
            for name, child in raw_props.items()
        }
        raw_required = obj.get("required", [])
        if not isinstance(raw_required, list) or not all(isinstance(n, str) for n in raw_required):
            raise MalformedSchema(f"{where}: required must be a list of names")
        required = frozenset(raw_required)
    elif kind == "array":
        raw_items = obj.get("items")
        if raw_items is None:
            raise MalformedSchema(f"{where}: array without items")
        items = _parse_node(raw_items, f"{where}{ARRAY_ITEM}", ignored)

    enum = obj.get("enum")
    if enum is not None:
        if not isinstance(enum, list) or not enum:
            raise MalformedSchema(f"{where}: enum must be a non-empty list")
        enum = tuple(enum)

    fmt = obj.get("format")
    return SchemaNode(
        kind=kind,
        properties=properties,
        required=required,
        items=items,
        enum=enum,
        unit_hint=_extract_unit_hint(obj),
        format_hint=fmt if isinstance(fmt, str) else None,
    )


def _canonical_obj(node: SchemaNode) -> dict[str, Any]:
    out: dict[str, Any] = {"type": node.kind}
    if node.kind == "object":
        out["properties"] = {
            name: _canonical_obj(child) for name, child in sorted((node.properties or {}).items())
        }
        if node.required:
            out["required"] = sorted(node.required)
    elif node.kind == "array":
        out["items"] = _canonical_obj(node.items)  # type: ignore[arg-type]
    if node.enum is not None:
        out["enum"] = list(node.enum)
    if node.unit_hint:
        out["x-unit"] = node.unit_hint
    if node.format_hint:
        out["format"] = node.format_hint
    return out


def canonical_text(root: SchemaNode) -> str:
    """Sorted keys, no insignificant whitespace, shortest float round-trip."""
    return json.dumps(_canonical_obj(root), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def parse_schema(text: str | Mapping[str, Any]) -> Schema:
    """Parse a JSON Schema subset document into a Schema.

    The middleware transforms JSON object bodies, so the root must declare
    type "object". Unsupported keywords are recorded and ignored.
    """
    if isinstance(text, (bytes, str)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedSchema(f"invalid JSON: {exc}") from exc
    else:
        doc = text
    if not isinstance(doc, Mapping):
        raise MalformedSchema("schema root must be a JSON object")
    ignored: set[str] = set()
    root = _parse_node(doc, "$", ignored)
    if root.kind != "object":
        raise MalformedSchema("schema root must have type \"object\"")
    if ignored:
        logger.warning("ignoring unsupported schema keywords: %s", sorted(ignored))
    return Schema(root=root, raw=canonical_text(root), ignored_keywords=frozenset(ignored))


def canonical_hash(schema: Schema) -> SchemaHash:
    """SHA-256 of the canonical text; stable across key order and whitespace."""
    return SchemaHash(hashlib.sha256(schema.raw.encode("utf-8")).digest())


def hash_pair(source: Schema, target: Schema) -> HashPair:
    return (canonical_hash(source), canonical_hash(target))


def _walk_leaves(node: SchemaNode, prefix: tuple[str, ...]) -> Iterator[tuple[Path, SchemaNode]]:
    if node.kind == "object":
        for name, child in (node.properties or {}).items():
            yield from _walk_leaves(child, prefix + (name,))
    elif node.kind == "array":
        yield from _walk_leaves(node.items, prefix + (ARRAY_ITEM,))  # type: ignore[arg-type]
    else:
        if prefix:
            yield Path(prefix), node


def leaf_paths(schema: Schema) -> set[Path]:
    """All root-to-leaf paths; array items contribute a single marker segment."""
    return {path for path, _ in _walk_leaves(schema.root, ())}


def leaf_nodes(schema: Schema) -> dict[Path, SchemaNode]:
    return dict(_walk_leaves(schema.root, ()))


def _walk_data_paths(node: SchemaNode, prefix: tuple[str, ...]) -> Iterator[tuple[Path, SchemaNode]]:
    if node.kind == "object":
        for name, child in (node.properties or {}).items():
            yield from _walk_data_paths(child, prefix + (name,))
    else:
        # arrays are addressed as whole values; item access goes through
        # adapter functions (first, mean, ...), never through indexed paths
        if prefix:
            yield Path(prefix), node


def data_paths(schema: Schema) -> dict[Path, SchemaNode]:
    """Marker-free paths addressing actual JSON values (scalars and arrays)."""
    return dict(_walk_data_paths(schema.root, ()))


def node_at(schema: Schema, path: Path) -> SchemaNode | None:
    """Node reached by following a marker-free path, or None."""
    node = schema.root
    for seg in path.segments:
        if seg == ARRAY_ITEM:
            if node.kind != "array":
                return None
            node = node.items  # type: ignore[assignment]
        else:
            if node.kind != "object" or seg not in (node.properties or {}):
                return None
            node = node.properties[seg]  # type: ignore[index]
    return node


def is_required_path(schema: Schema, path: Path) -> bool:
    """True when every object segment along the path is required."""
    node = schema.root
    for seg in path.segments:
        if seg == ARRAY_ITEM:
            if node.kind != "array":
                return False
            node = node.items  # type: ignore[assignment]
            continue
        if node.kind != "object" or seg not in (node.properties or {}):
            return False
        if seg not in node.required:
            return False
        node = node.properties[seg]  # type: ignore[index]
    return True


def _kind_of_value(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, Mapping):
        return "object"
    return type(value).__name__


def _value_matches_kind(value: Any, kind: str) -> bool:
    if kind == "integer":
        if isinstance(value, bool):
            return False
        # Draft 2020-12: a float with zero fractional part is a valid integer
        return isinstance(value, int) or (isinstance(value, float) and value.is_integer())
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "null":
        return value is None
    if kind == "object":
        return isinstance(value, Mapping)
    if kind == "array":
        return isinstance(value, list)
    return False


def _enum_holds(value: Any, enum: tuple[Any, ...]) -> bool:
    for candidate in enum:
        if isinstance(candidate, bool) != isinstance(value, bool):
            continue
        if candidate == value:
            return True
    return False


def _check_node(value: Any, node: SchemaNode, prefix: tuple[str, ...],
                violations: list[tuple[Path, str]]) -> None:
    where = Path(prefix) if prefix else None

    def report(reason: str, at: Path | None = None) -> None:
        violations.append((at or where or Path(("$",)), reason))

    if not _value_matches_kind(value, node.kind):
        report(f"expected {node.kind}, got {_kind_of_value(value)}")
        return
    if node.enum is not None and not _enum_holds(value, node.enum):
        report(f"value {value!r} not in enum")
    if node.kind == "object":
        for name in sorted(node.required):
            if name not in value:
                report("required property missing", Path(prefix + (name,)))
        for name, child in (node.properties or {}).items():
            if name in value:
                _check_node(value[name], child, prefix + (name,), violations)
    elif node.kind == "array":
        for item in value:
            _check_node(item, node.items, prefix + (ARRAY_ITEM,), violations)  # type: ignore[arg-type]


def check_against_schema(value: Any, schema: Schema) -> list[tuple[Path, str]]:
    """Violations of the supported subset (types, required, enum); empty if valid."""
    violations: list[tuple[Path, str]] = []
    _check_node(value, schema.root, (), violations)
    return violations


@dataclass(frozen=True)
class RouteConfig:
    """Transformation contract for one intercepted route."""

    path_pattern: str
    methods: frozenset[str]
    source_schema: Schema
    target_schema: Schema
    source_service: str
    target_service: str
    strategy: str = "CODEGEN"
    safeguards_enabled: bool = True
    min_confidence: float = 0.7
    direction: str = "request"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"route {self.path_pattern}: unknown strategy {self.strategy!r}")
        bad = self.methods - TRANSFORMABLE_METHODS
        if bad or not self.methods:
            raise ConfigError(
                f"route {self.path_pattern}: methods must be a non-empty subset "
                f"of {sorted(TRANSFORMABLE_METHODS)}"
            )
        if self.direction != "request":
            raise ConfigError(
                f"route {self.path_pattern}: only direction \"request\" is supported"
            )


@dataclass(frozen=True)
class SchemaRegistry:
    """Ordered, immutable collection of routes; safe to share across threads."""

    routes: tuple[RouteConfig, ...]
    extra_units: tuple[UnitConversion, ...] = ()
    default_service: str = ""

    def __post_init__(self):
        seen: set[tuple[str, str]] = set()
        for route in self.routes:
            for method in route.methods:
                key = (route.path_pattern, method)
                if key in seen:
                    raise ConfigError(f"duplicate route {key[0]} [{key[1]}]")
                seen.add(key)


def _is_path_prefix(pattern: str, path: str) -> bool:
    pattern = pattern.rstrip("/") or "/"
    if path == pattern:
        return True
    if pattern == "/":
        return path.startswith("/")
    return path.startswith(pattern + "/")


def match_route(registry: SchemaRegistry, method: str, path: str) -> RouteConfig | None:
    """Exact path match wins; otherwise the longest registered prefix; else None."""
    best: RouteConfig | None = None
    for route in registry.routes:
        if method not in route.methods:
            continue
        if route.path_pattern == path:
            return route
        if _is_path_prefix(route.path_pattern, path):
            if best is None or len(route.path_pattern) > len(best.path_pattern):
                best = route
    return best


def _load_schema_ref(ref: Any, base_dir: FsPath, where: str) -> Schema:
    if isinstance(ref, Mapping):
        try:
            return parse_schema(ref)
        except MalformedSchema as exc:
            raise ConfigError(f"{where}: inline schema invalid: {exc}") from exc
    if isinstance(ref, str):
        schema_path = FsPath(ref)
        if not schema_path.is_absolute():
            schema_path = base_dir / schema_path
        try:
            text = schema_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{where}: cannot read schema file {schema_path}: {exc}") from exc
        try:
            return parse_schema(text)
        except MalformedSchema as exc:
            raise ConfigError(f"{where}: schema file {schema_path} invalid: {exc}") from exc
    raise ConfigError(f"{where}: schema must be an inline object or a file path")


def load_registry(doc: Mapping[str, Any] | str, base_dir: str | FsPath | None = None) -> SchemaRegistry:
    """Load the registry config document; all schemas are parsed eagerly."""
    if isinstance(doc, str):
        config_path = FsPath(doc)
        base_dir = FsPath(base_dir) if base_dir else config_path.parent
        try:
            doc = json.loads(config_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {config_path} is not valid JSON: {exc}") from exc
    else:
        base_dir = FsPath(base_dir) if base_dir else FsPath.cwd()
    if not isinstance(doc, Mapping) or not isinstance(doc.get("routes"), list):
        raise ConfigError("config must be an object with a \"routes\" list")

    routes: list[RouteConfig] = []
    for index, raw in enumerate(doc["routes"]):
        where = f"routes[{index}]"
        if not isinstance(raw, Mapping):
            raise ConfigError(f"{where}: route must be an object")
        pattern = raw.get("path")
        if not isinstance(pattern, str) or not pattern.startswith("/"):
            raise ConfigError(f"{where}: path must start with '/'")
        where = f"routes[{index}] ({pattern})"
        methods = raw.get("methods", ["POST"])
        if not isinstance(methods, list):
            raise ConfigError(f"{where}: methods must be a list")
        try:
            routes.append(
                RouteConfig(
                    path_pattern=pattern,
                    methods=frozenset(str(m).upper() for m in methods),
                    source_schema=_load_schema_ref(raw.get("source_schema"), base_dir, where),
                    target_schema=_load_schema_ref(raw.get("target_schema"), base_dir, where),
                    source_service=str(raw.get("source_service", "")),
                    target_service=str(raw.get("target_service", "")),
                    strategy=str(raw.get("strategy", "CODEGEN")).upper(),
                    safeguards_enabled=bool(raw.get("safeguards", True)),
                    min_confidence=float(raw.get("min_confidence", 0.7)),
                    direction=str(raw.get("direction", "request")),
                )
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    units: list[UnitConversion] = []
    for index, raw in enumerate(doc.get("units", [])):
        where = f"units[{index}]"
        try:
            units.append(
                UnitConversion(
                    from_unit=str(raw["from"]),
                    to_unit=str(raw["to"]),
                    scale_num=float(raw["scale"]),
                    scale_den=1.0,
                    offset=float(raw.get("offset", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    return SchemaRegistry(
        routes=tuple(routes),
        extra_units=tuple(units),
        default_service=str(doc.get("default_service", "")),
    )
