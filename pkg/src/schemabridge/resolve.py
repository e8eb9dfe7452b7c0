"""Resolution engine: mapping generation, DIRECT / CODEGEN transforms, caching.

DIRECT asks the model to transform every request following a cached mapping.
CODEGEN turns the mapping into a validated adapter program once, then replays
it with zero model calls. The cache key is the canonical schema-hash pair, so
textually different but canonically identical schemas share entries.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Callable, Mapping

from .adapter import (
    AdapterProgram,
    EvalError,
    StaticViolation,
    TrialFailure,
    ValidatedAdapter,
    execute_adapter,
    program_from_json,
    program_to_json,
    validate_adapter,
)
from .detect import MismatchReport, PairMismatch, report_to_doc
from .gateway.errors import ContractViolation, LlmFailure
from .model import (
    HashPair,
    Path,
    RouteConfig,
    Schema,
    SchemaHash,
    data_paths,
    hash_pair,
)


class ResolutionFailure(Exception):
    """Resolution could not produce output; the safeguard layer takes over."""


@dataclass(frozen=True)
class FieldMapping:
    """One target field: where it comes from and how it transforms."""

    target_path: Path
    source_path: Path | None = None
    transform: str = "identity"
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if not self.transform:
            raise ValueError("transform must be non-empty")


@dataclass(frozen=True)
class SchemaMapping:
    pair: HashPair
    fields: tuple[FieldMapping, ...] = ()

    def __post_init__(self):
        targets = [f.target_path for f in self.fields]
        if len(targets) != len(set(targets)):
            raise ValueError("mapping entries share a target_path")

    def min_confidence(self) -> float:
        return min((f.confidence for f in self.fields), default=1.0)


@dataclass(frozen=True)
class CacheEntry:
    mapping: SchemaMapping
    adapter: ValidatedAdapter | None = None
    created_at: float = 0.0


@dataclass(frozen=True)
class ResolutionOutcome:
    output: dict[str, Any]
    strategy: str
    llm_calls: int
    cache_hit: bool
    mapping: SchemaMapping


def mapping_to_doc(mapping: SchemaMapping) -> dict[str, Any]:
    return {
        "pair": {"source": mapping.pair[0].hex, "target": mapping.pair[1].hex},
        "fields": [
            {
                "source_path": str(f.source_path) if f.source_path else None,
                "target_path": str(f.target_path),
                "transform": f.transform,
                "confidence": f.confidence,
            }
            for f in mapping.fields
        ],
    }


def mapping_from_contract(contract: Any, source: Schema, target: Schema) -> SchemaMapping:
    """Convert a verified wire mapping into the domain type.

    Paths must address actual values of the respective schemas; anything else
    is a contract violation (the model referenced fields that do not exist).
    """
    source_ok = set(data_paths(source))
    target_ok = set(data_paths(target))
    fields: list[FieldMapping] = []
    for entry in contract.fields:
        target_path = Path.parse(entry.target_path)
        if target_path not in target_ok:
            raise ContractViolation(f"mapping target {entry.target_path!r} not in target schema")
        source_path = None
        if entry.source_path is not None:
            source_path = Path.parse(entry.source_path)
            if source_path not in source_ok:
                raise ContractViolation(
                    f"mapping source {entry.source_path!r} not in source schema"
                )
        fields.append(
            FieldMapping(
                target_path=target_path,
                source_path=source_path,
                transform=entry.transform,
                confidence=entry.confidence,
            )
        )
    return SchemaMapping(pair=hash_pair(source, target), fields=tuple(fields))


def generate_mapping(llm: Any, source: Schema, target: Schema,
                     report: MismatchReport) -> SchemaMapping:
    """One model call producing a field mapping; contract enforced locally."""
    if report.pair != hash_pair(source, target):
        raise PairMismatch("mismatch report references a different schema pair")
    contract = llm.generate_mapping(source, target, report_to_doc(report))
    return mapping_from_contract(contract, source, target)


def transform_direct(llm: Any, mapping: SchemaMapping, data: Mapping[str, Any]) -> dict:
    """Per-request model transformation guided by the mapping (DIRECT step 2)."""
    contract = llm.transform_data(mapping_to_doc(mapping), data)
    return contract.output


def generate_adapter(llm: Any, source: Schema, target: Schema,
                     mapping: SchemaMapping) -> AdapterProgram:
    """One model call producing an adapter program (CODEGEN step 2)."""
    contract = llm.generate_adapter(source, target, mapping_to_doc(mapping))
    return program_from_json({"assignments": contract.assignments})


class _Flight:
    __slots__ = ("done", "entry", "error")

    def __init__(self):
        self.done = threading.Event()
        self.entry: CacheEntry | None = None
        self.error: BaseException | None = None


class MappingCache:
    """Hash-pair keyed cache with single-flight computation.

    Concurrent callers for the same cold pair trigger the compute at most
    once; a failed compute is propagated to every waiter and never poisons
    the cache. No eviction: the key space is bounded by registered pairs.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[HashPair, CacheEntry] = {}
        self._flights: dict[HashPair, _Flight] = {}

    def get(self, pair: HashPair) -> CacheEntry | None:
        with self._lock:
            return self._entries.get(pair)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def get_or_compute(self, pair: HashPair,
                       compute: Callable[[], CacheEntry]) -> tuple[CacheEntry, bool]:
        """Return (entry, cache_hit); hit is False only for the computing caller."""
        while True:
            with self._lock:
                entry = self._entries.get(pair)
                if entry is not None:
                    return entry, True
                flight = self._flights.get(pair)
                if flight is None:
                    flight = _Flight()
                    self._flights[pair] = flight
                    owner = True
                else:
                    owner = False
            if owner:
                try:
                    entry = compute()
                except BaseException as exc:
                    with self._lock:
                        self._flights.pop(pair, None)
                    flight.error = exc
                    flight.done.set()
                    raise
                with self._lock:
                    self._entries[pair] = entry
                    self._flights.pop(pair, None)
                flight.entry = entry
                flight.done.set()
                return entry, False
            flight.done.wait()
            if flight.error is not None:
                raise flight.error
            if flight.entry is not None:
                return flight.entry, True
            # flight vanished without result; retry from the top


def cache_get_or_compute(cache: MappingCache, pair: HashPair,
                         compute: Callable[[], CacheEntry]) -> tuple[CacheEntry, bool]:
    return cache.get_or_compute(pair, compute)


def save_cache(cache: MappingCache, path: str | FsPath) -> None:
    """Persist entries to one JSON file (optional, typically on shutdown)."""
    with cache._lock:
        entries = dict(cache._entries)
    doc = []
    for pair, entry in entries.items():
        doc.append(
            {
                "pair": {"source": pair[0].hex, "target": pair[1].hex},
                "mapping": mapping_to_doc(entry.mapping),
                "adapter": program_to_json(entry.adapter.program) if entry.adapter else None,
                "created_at": entry.created_at,
            }
        )
    FsPath(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")


def load_cache(path: str | FsPath) -> MappingCache:
    """Rehydrate a persisted cache; adapters were validated before saving."""
    cache = MappingCache()
    doc = json.loads(FsPath(path).read_text(encoding="utf-8"))
    for raw in doc:
        pair = (
            SchemaHash(bytes.fromhex(raw["pair"]["source"])),
            SchemaHash(bytes.fromhex(raw["pair"]["target"])),
        )
        fields = tuple(
            FieldMapping(
                target_path=Path.parse(f["target_path"]),
                source_path=Path.parse(f["source_path"]) if f.get("source_path") else None,
                transform=f.get("transform", "identity"),
                confidence=float(f.get("confidence", 1.0)),
            )
            for f in raw["mapping"]["fields"]
        )
        mapping = SchemaMapping(pair=pair, fields=fields)
        adapter = None
        if raw.get("adapter"):
            adapter = ValidatedAdapter(program=program_from_json(raw["adapter"]), pair=pair)
        cache._entries[pair] = CacheEntry(
            mapping=mapping, adapter=adapter, created_at=float(raw.get("created_at", 0.0))
        )
    return cache


def resolve(route: RouteConfig, data: Mapping[str, Any], report: MismatchReport,
            llm: Any, cache: MappingCache | None) -> ResolutionOutcome:
    """Run the route's strategy; cache may be None (always cold, benchmarking)."""
    source, target = route.source_schema, route.target_schema
    pair = hash_pair(source, target)
    calls_before = llm.calls

    def compute_direct() -> CacheEntry:
        mapping = generate_mapping(llm, source, target, report)
        return CacheEntry(mapping=mapping, created_at=time.time())

    def compute_codegen() -> CacheEntry:
        mapping = generate_mapping(llm, source, target, report)
        program = generate_adapter(llm, source, target, mapping)
        validated = validate_adapter(program, source, target, sample=data)
        return CacheEntry(mapping=mapping, adapter=validated, created_at=time.time())

    try:
        if route.strategy == "CODEGEN":
            if cache is None:
                entry, hit = compute_codegen(), False
            else:
                entry, hit = cache.get_or_compute(pair, compute_codegen)
            output = execute_adapter(entry.adapter, data)  # type: ignore[arg-type]
        else:
            if cache is None:
                entry, hit = compute_direct(), False
            else:
                entry, hit = cache.get_or_compute(pair, compute_direct)
            output = transform_direct(llm, entry.mapping, data)
    except (LlmFailure, StaticViolation, TrialFailure, EvalError, PairMismatch) as exc:
        raise ResolutionFailure(f"{route.strategy} resolution failed: {exc}") from exc

    return ResolutionOutcome(
        output=output,
        strategy=route.strategy,
        llm_calls=llm.calls - calls_before,
        cache_hit=hit,
        mapping=entry.mapping,
    )
