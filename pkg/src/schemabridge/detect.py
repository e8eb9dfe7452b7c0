"""Hybrid mismatch detection: deterministic structural diff plus LLM semantics.

The structural walk never touches the network and is the half the pipeline can
always rely on; semantic findings (naming, units) are additive and supersede
structural entries only where the exact (source_path, target_path) pair
overlaps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

from .model import (
    HashPair,
    KINDS,
    Path,
    Schema,
    SchemaNode,
    hash_pair,
    is_required_path,
    leaf_nodes,
)

logger = logging.getLogger(__name__)

MISMATCH_KINDS = frozenset(
    {
        "field_missing",
        "field_extra",
        "type_mismatch",
        "nesting_mismatch",
        "cardinality_mismatch",
        "naming_mismatch",
        "unit_mismatch",
    }
)
SEMANTIC_ONLY_KINDS = frozenset({"naming_mismatch", "unit_mismatch"})
SEVERITIES = ("low", "medium", "high")

_NUMERIC_FAMILY = frozenset({"integer", "number"})
_COERCIBLE_PAIRS = frozenset(
    {
        frozenset({"string", "number"}),
        frozenset({"string", "integer"}),
        frozenset({"string", "boolean"}),
    }
)


class PairMismatch(ValueError):
    """Reports being merged reference different schema-hash pairs."""


@dataclass(frozen=True)
class Mismatch:
    kind: str
    source_path: Path | None = None
    target_path: Path | None = None
    source_type: str | None = None
    target_type: str | None = None
    detail: str = ""
    severity: str = "medium"
    origin: str = "structural"

    def __post_init__(self):
        if self.kind not in MISMATCH_KINDS:
            raise ValueError(f"unknown mismatch kind {self.kind!r}")
        if self.source_path is None and self.target_path is None:
            raise ValueError("mismatch must reference at least one path")
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.origin not in ("structural", "semantic"):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.kind in SEMANTIC_ONLY_KINDS and self.origin != "semantic":
            raise ValueError(f"{self.kind} can only originate from the semantic detector")

    @property
    def path_pair(self) -> tuple[Path | None, Path | None]:
        return (self.source_path, self.target_path)

    def dedup_key(self) -> tuple[str, Path | None, Path | None]:
        return (self.kind, self.source_path, self.target_path)


@dataclass(frozen=True)
class MismatchReport:
    """Deduplicated mismatch list for one schema pair."""

    pair: HashPair
    mismatches: tuple[Mismatch, ...] = ()
    degraded: bool = False

    def __post_init__(self):
        seen: set[tuple] = set()
        unique: list[Mismatch] = []
        for m in self.mismatches:
            key = m.dedup_key()
            if key not in seen:
                seen.add(key)
                unique.append(m)
        object.__setattr__(self, "mismatches", tuple(unique))

    def path_pairs(self) -> set[tuple[Path | None, Path | None]]:
        return {m.path_pair for m in self.mismatches}


def classify_severity(source_kind: str, target_kind: str) -> str:
    """Severity by type distance: numeric family low, coercible medium, else high."""
    for kind in (source_kind, target_kind):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
    if source_kind == target_kind:
        return "low"
    if {source_kind, target_kind} <= _NUMERIC_FAMILY:
        return "low"
    if frozenset((source_kind, target_kind)) in _COERCIBLE_PAIRS:
        return "medium"
    return "high"


def _cardinality_severity(a: SchemaNode, b: SchemaNode) -> str:
    if a.kind == b.kind or {a.kind, b.kind} <= _NUMERIC_FAMILY:
        return "medium"
    return "high"


def _marker_count(path: Path) -> int:
    return sum(1 for seg in path.segments if seg == "[]")


def _pair_mismatches(sp: Path, sn: SchemaNode, tp: Path, tn: SchemaNode,
                     nested: bool) -> list[Mismatch]:
    found: list[Mismatch] = []
    if nested:
        found.append(
            Mismatch(
                kind="nesting_mismatch",
                source_path=sp,
                target_path=tp,
                source_type=sn.kind,
                target_type=tn.kind,
                detail=f"{sp} -> {tp}",
                severity="low",
            )
        )
    if _marker_count(sp) != _marker_count(tp):
        found.append(
            Mismatch(
                kind="cardinality_mismatch",
                source_path=sp,
                target_path=tp,
                source_type=sn.kind,
                target_type=tn.kind,
                detail=f"{sp} -> {tp}",
                severity=_cardinality_severity(sn, tn),
            )
        )
    elif sn.kind != tn.kind:
        found.append(
            Mismatch(
                kind="type_mismatch",
                source_path=sp,
                target_path=tp,
                source_type=sn.kind,
                target_type=tn.kind,
                detail=f"{sn.kind} -> {tn.kind}",
                severity=classify_severity(sn.kind, tn.kind),
            )
        )
    return found


def detect_structural(source: Schema, target: Schema) -> MismatchReport:
    """Recursive property walk over both schemas; deterministic, no model calls.

    Leaves pair first by identical (marker-stripped) path, then by identical
    leaf name across depths (a nesting mismatch); everything left is reported
    missing (source-only) or extra (target-only).
    """
    source_leaves = leaf_nodes(source)
    target_leaves = leaf_nodes(target)
    mismatches: list[Mismatch] = []

    s_by_eff = {p.without_markers(): p for p in source_leaves}
    t_by_eff = {p.without_markers(): p for p in target_leaves}

    s_rest: dict[Path, SchemaNode] = dict(source_leaves)
    t_rest: dict[Path, SchemaNode] = dict(target_leaves)
    for eff in sorted(set(s_by_eff) & set(t_by_eff)):
        sp, tp = s_by_eff[eff], t_by_eff[eff]
        mismatches.extend(
            _pair_mismatches(sp, source_leaves[sp], tp, target_leaves[tp], nested=False)
        )
        del s_rest[sp]
        del t_rest[tp]

    s_by_name: dict[str, list[Path]] = {}
    for p in s_rest:
        s_by_name.setdefault(p.leaf_name, []).append(p)
    t_by_name: dict[str, list[Path]] = {}
    for p in t_rest:
        t_by_name.setdefault(p.leaf_name, []).append(p)
    for name in sorted(set(s_by_name) & set(t_by_name)):
        s_paths = sorted(s_by_name[name], key=str)
        t_paths = sorted(t_by_name[name], key=str)
        for sp, tp in zip(s_paths, t_paths):
            mismatches.extend(
                _pair_mismatches(sp, source_leaves[sp], tp, target_leaves[tp], nested=True)
            )
            del s_rest[sp]
            del t_rest[tp]

    for sp in sorted(s_rest, key=str):
        mismatches.append(
            Mismatch(
                kind="field_missing",
                source_path=sp,
                source_type=source_leaves[sp].kind,
                detail="no counterpart in target schema",
                severity="medium",
            )
        )
    for tp in sorted(t_rest, key=str):
        node = target_leaves[tp]
        required = is_required_path(target, tp)
        mismatches.append(
            Mismatch(
                kind="field_extra",
                target_path=tp,
                target_type=node.kind,
                detail="no counterpart in source schema",
                severity="medium" if required else "low",
            )
        )

    return MismatchReport(pair=hash_pair(source, target), mismatches=tuple(mismatches))


def detect_semantic(llm: Any, source: Schema, target: Schema) -> MismatchReport:
    """LLM-backed naming/unit analysis; degrades to an empty report on failure.

    Never raises: structural results must stay valid when the model is down.
    """
    pair = hash_pair(source, target)
    try:
        raw = llm.detect_mismatches(source, target)
        kept = tuple(
            Mismatch(
                kind=entry.kind,
                source_path=Path.parse(entry.source_path) if entry.source_path else None,
                target_path=Path.parse(entry.target_path) if entry.target_path else None,
                source_type=entry.source_type,
                target_type=entry.target_type,
                detail=entry.detail,
                severity=entry.severity,
                origin="semantic",
            )
            for entry in raw.mismatches
            if entry.kind in SEMANTIC_ONLY_KINDS
        )
    except Exception as exc:
        logger.warning("semantic detection degraded: %s", exc)
        return MismatchReport(pair=pair, degraded=True)
    return MismatchReport(pair=pair, mismatches=kept)


def merge_reports(structural: MismatchReport, semantic: MismatchReport) -> MismatchReport:
    """Union of both reports; semantic wins on overlapping path pairs."""
    if structural.pair != semantic.pair:
        raise PairMismatch("reports reference different schema pairs")
    overlap = {m.path_pair for m in semantic.mismatches}
    merged = list(semantic.mismatches) + [
        m for m in structural.mismatches if m.path_pair not in overlap
    ]
    return MismatchReport(
        pair=structural.pair,
        mismatches=tuple(merged),
        degraded=structural.degraded or semantic.degraded,
    )


def report_to_doc(report: MismatchReport) -> dict[str, Any]:
    """JSON-ready form of a report, used in prompts and metrics records."""
    return {
        "pair": {"source": report.pair[0].hex, "target": report.pair[1].hex},
        "degraded": report.degraded,
        "mismatches": [
            {
                "kind": m.kind,
                "source_path": str(m.source_path) if m.source_path else None,
                "target_path": str(m.target_path) if m.target_path else None,
                "source_type": m.source_type,
                "target_type": m.target_type,
                "detail": m.detail,
                "severity": m.severity,
                "origin": m.origin,
            }
            for m in report.mismatches
        ],
    }
