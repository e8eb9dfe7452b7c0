"""Deterministic mock backend for offline runs and safeguard testing.

Canned contract responses are keyed by (contract kind, schema-hash pair) and
come from the scenario fixture files' ``llm_fixture`` sections. Three modes:

* faithful - return the canned response; transformations execute the canned
  adapter program, restricted to whatever mapping the caller sent.
* faulty(kind, rate) - corrupt responses at the given rate, seeded, to drive
  the ensemble and fallback tiers.
* outage - every call times out.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Mapping

from ..adapter import Assignment, AdapterProgram, EvalError, Get, evaluate_expr, program_from_json, program_to_json
from ..model import HashPair, Path, Schema, data_paths, hash_pair, parse_schema
from .client import StructuredRequest
from .errors import MissingFixture, Timeout
from .profiles import TokenUsage

logger = logging.getLogger(__name__)

FAULT_KINDS = ("garbled", "drop_field", "bad_function", "wrong_value")

_GARBLED = {"mismatches": "?", "fields": "?", "assignments": "?", "output": "?"}


@dataclass(frozen=True)
class MockFixture:
    """Canned responses for one schema pair."""

    pair: HashPair
    source: Schema
    target: Schema
    semantic_mismatches: tuple[dict, ...]
    mapping_fields: tuple[dict, ...]
    program: AdapterProgram


def _load_fixture_file(path: FsPath) -> MockFixture | None:
    doc = json.loads(path.read_text(encoding="utf-8"))
    llm = doc.get("llm_fixture")
    if llm is None:
        return None
    source = parse_schema(doc["source_schema"])
    target = parse_schema(doc["target_schema"])
    return MockFixture(
        pair=hash_pair(source, target),
        source=source,
        target=target,
        semantic_mismatches=tuple(llm.get("semantic_mismatches", [])),
        mapping_fields=tuple(llm["mapping"]["fields"]),
        program=program_from_json(llm["adapter"]),
    )


class MockBackend:
    """In-process backend; deterministic given (seed, call sequence)."""

    def __init__(
        self,
        fixtures: Mapping[HashPair, MockFixture],
        mode: str = "faithful",
        fault_kind: str = "drop_field",
        fault_rate: float = 0.0,
        seed: int = 0,
    ):
        if mode not in ("faithful", "faulty", "outage"):
            raise ValueError(f"unknown mock mode {mode!r}")
        if mode == "faulty" and fault_kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {fault_kind!r}")
        self.fixtures = dict(fixtures)
        self.mode = mode
        self.fault_kind = fault_kind
        self.fault_rate = fault_rate
        self.seed = seed
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}
        self._pair_counts: dict[tuple[str, str], int] = {}

    @classmethod
    def from_directory(cls, directory: str | FsPath, mode: str = "faithful",
                       fault_kind: str = "drop_field", fault_rate: float = 0.0,
                       seed: int = 0) -> "MockBackend":
        fixtures: dict[HashPair, MockFixture] = {}
        for file in sorted(FsPath(directory).glob("*.json")):
            fixture = _load_fixture_file(file)
            if fixture is not None:
                fixtures[fixture.pair] = fixture
        return cls(fixtures, mode=mode, fault_kind=fault_kind,
                   fault_rate=fault_rate, seed=seed)

    # -- instrumentation -----------------------------------------------------

    def call_count(self, contract: str, pair: HashPair | None = None) -> int:
        with self._lock:
            if pair is None:
                return self._counts.get(contract, 0)
            return self._pair_counts.get((contract, _pair_key(pair)), 0)

    def reset_counters(self) -> None:
        with self._lock:
            self._counts.clear()
            self._pair_counts.clear()

    # -- backend protocol ----------------------------------------------------

    def complete_structured(self, request: StructuredRequest) -> tuple[Any, TokenUsage]:
        key = _pair_key(request.pair) if request.pair else "-"
        with self._lock:
            self._counts[request.contract] = self._counts.get(request.contract, 0) + 1
            pair_index = self._pair_counts.get((request.contract, key), 0)
            self._pair_counts[(request.contract, key)] = pair_index + 1

        if self.mode == "outage":
            raise Timeout("mock outage")

        doc = self._faithful_response(request)
        if self.mode == "faulty":
            doc = self._maybe_corrupt(doc, request, key, pair_index)
        usage = TokenUsage(
            input_tokens=max(1, len(request.prompt) // 4),
            output_tokens=max(1, len(json.dumps(doc, default=str)) // 4),
        )
        return doc, usage

    # -- faithful responses --------------------------------------------------

    def _fixture_for(self, request: StructuredRequest) -> MockFixture | None:
        if request.pair is None:
            return None
        return self.fixtures.get(request.pair)

    def _faithful_response(self, request: StructuredRequest) -> Any:
        fixture = self._fixture_for(request)
        identical = request.pair is not None and request.pair[0] == request.pair[1]
        if request.contract == "MismatchReport":
            if fixture:
                return {"mismatches": [dict(m) for m in fixture.semantic_mismatches]}
            if identical:
                return {"mismatches": []}
        elif request.contract == "SchemaMapping":
            if fixture:
                return {"fields": [dict(f) for f in fixture.mapping_fields]}
            if identical and request.source is not None:
                return {"fields": _identity_fields(request.source)}
        elif request.contract == "AdapterProgram":
            if fixture:
                return program_to_json(fixture.program)
            if identical and request.source is not None:
                return program_to_json(_identity_program(request.source))
        elif request.contract == "TransformedData":
            return {"output": self._transform(request, fixture)}
        else:
            raise ValueError(f"unknown contract {request.contract!r}")
        raise MissingFixture(f"no fixture for pair {_short_pair(request.pair)}")

    def _transform(self, request: StructuredRequest, fixture: MockFixture | None) -> dict:
        mapping_doc = request.mapping_doc or {}
        fields = mapping_doc.get("fields", [])
        wanted = {str(f.get("target_path")) for f in fields}
        if fixture is not None:
            program = AdapterProgram(
                tuple(a for a in fixture.program.assignments if str(a.target) in wanted)
            )
        else:
            # no canned program: replay the mapping's identity entries
            assignments = []
            for f in fields:
                if f.get("transform") == "identity" and f.get("source_path"):
                    assignments.append(
                        Assignment(
                            target=Path.parse(str(f["target_path"])),
                            expr=Get(Path.parse(str(f["source_path"]))),
                        )
                    )
            program = AdapterProgram(tuple(assignments))
        return _execute_lenient(program, request.payload or {})

    # -- fault injection -----------------------------------------------------

    def _rng(self, request: StructuredRequest, key: str, pair_index: int) -> random.Random:
        material = f"{self.seed}:{request.contract}:{key}:{pair_index}"
        digest = hashlib.sha256(material.encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def _maybe_corrupt(self, doc: Any, request: StructuredRequest, key: str,
                       pair_index: int) -> Any:
        rng = self._rng(request, key, pair_index)
        if rng.random() >= self.fault_rate:
            return doc
        kind = self.fault_kind
        if kind == "garbled":
            return dict(_GARBLED)
        if kind == "drop_field":
            return _drop_one(doc, request.contract, rng)
        if kind == "bad_function":
            if request.contract == "AdapterProgram":
                return _break_assignment(
                    doc, rng, {"kind": "call", "fn": "exec_native", "args": []}
                )
            return doc
        if kind == "wrong_value":
            if request.contract == "TransformedData":
                return _corrupt_leaf(doc, rng)
            if request.contract == "AdapterProgram":
                return _break_assignment(
                    doc, rng, {"kind": "const", "value": "__corrupted__"}
                )
            if request.contract == "SchemaMapping" and doc.get("fields"):
                out = json.loads(json.dumps(doc))
                victim = rng.randrange(len(out["fields"]))
                out["fields"][victim]["confidence"] = 0.0
                return out
        return doc


def _pair_key(pair: HashPair) -> str:
    return f"{pair[0].hex}:{pair[1].hex}"


def _short_pair(pair: HashPair | None) -> str:
    if pair is None:
        return "<none>"
    return f"({pair[0].hex[:8]}, {pair[1].hex[:8]})"


def _identity_fields(source: Schema) -> list[dict]:
    return [
        {
            "source_path": str(path),
            "target_path": str(path),
            "transform": "identity",
            "confidence": 1.0,
        }
        for path in sorted(data_paths(source), key=str)
    ]


def _identity_program(source: Schema) -> AdapterProgram:
    return AdapterProgram(
        tuple(
            Assignment(target=path, expr=Get(path))
            for path in sorted(data_paths(source), key=str)
        )
    )


def _execute_lenient(program: AdapterProgram, data: Mapping[str, Any]) -> dict:
    """Best-effort execution: skip failing assignments, like a shaky model would."""
    out: dict[str, Any] = {}
    for assignment in program.assignments:
        try:
            value = evaluate_expr(assignment.expr, data)
        except EvalError:
            continue
        node = out
        ok = True
        for seg in assignment.target.segments[:-1]:
            node = node.setdefault(seg, {})
            if not isinstance(node, dict):
                ok = False
                break
        if ok:
            node[assignment.target.segments[-1]] = value
    return out


def _drop_one(doc: Any, contract: str, rng: random.Random) -> Any:
    out = json.loads(json.dumps(doc))
    key = {"MismatchReport": "mismatches", "SchemaMapping": "fields",
           "AdapterProgram": "assignments"}.get(contract)
    if key is not None:
        items = out.get(key) or []
        if items:
            items.pop(rng.randrange(len(items)))
        return out
    # TransformedData: remove one leaf from the output object
    leaves = _object_leaves(out.get("output", {}))
    if leaves:
        path = leaves[rng.randrange(len(leaves))]
        node = out["output"]
        for seg in path[:-1]:
            node = node[seg]
        del node[path[-1]]
    return out


def _corrupt_leaf(doc: Any, rng: random.Random) -> Any:
    out = json.loads(json.dumps(doc))
    leaves = _object_leaves(out.get("output", {}))
    if leaves:
        path = leaves[rng.randrange(len(leaves))]
        node = out["output"]
        for seg in path[:-1]:
            node = node[seg]
        node[path[-1]] = "__corrupted__"
    return out


def _break_assignment(doc: Any, rng: random.Random, expr: dict) -> Any:
    out = json.loads(json.dumps(doc))
    assignments = out.get("assignments") or []
    if assignments:
        victim = rng.randrange(len(assignments))
        assignments[victim]["expr"] = expr
    return out


def _object_leaves(obj: Any, prefix: tuple[str, ...] = ()) -> list[tuple[str, ...]]:
    leaves: list[tuple[str, ...]] = []
    if isinstance(obj, Mapping):
        for name in sorted(obj):
            child = obj[name]
            if isinstance(child, Mapping):
                leaves.extend(_object_leaves(child, prefix + (name,)))
            else:
                leaves.append(prefix + (name,))
    return leaves


def mock_backend(fixtures_dir: str | FsPath, mode: str = "faithful",
                 fault_kind: str = "drop_field", fault_rate: float = 0.0,
                 seed: int = 0) -> MockBackend:
    """Build a mock backend from a scenario fixtures directory."""
    return MockBackend.from_directory(fixtures_dir, mode=mode, fault_kind=fault_kind,
                                      fault_rate=fault_rate, seed=seed)
