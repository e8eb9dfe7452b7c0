"""Scenario fixtures: self-contained benchmark cases loaded from JSON files.

Each file carries the schema pair, a sample input, the hand-derived golden
output (the derivation is written down in ``notes``), and the expected
mismatch pairs for detection scoring. Fixture invariants are asserted at load
time: the input must validate against the source schema and the golden against
the target schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FsPath
from typing import Any

from ..model import RouteConfig, Schema, check_against_schema, parse_schema

PROTOCOLS = ("rest", "iot", "graphql")

ExpectedMismatch = tuple[str | None, str | None, str]


class FixtureError(ValueError):
    """Fixture file is malformed or violates a fixture invariant."""


@dataclass(frozen=True)
class ScenarioFixture:
    id: int
    name: str
    protocol: str
    source_schema: Schema
    target_schema: Schema
    input: dict[str, Any]
    golden: dict[str, Any]
    expected_mismatches: tuple[ExpectedMismatch, ...]
    notes: str = ""

    def expected_pairs(self) -> set[tuple[str | None, str | None]]:
        return {(source, target) for source, target, _ in self.expected_mismatches}


def default_scenarios_dir() -> FsPath:
    return FsPath(str(resources.files("schemabridge").joinpath("scenarios")))


def load_fixture(path: str | FsPath) -> ScenarioFixture:
    path = FsPath(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"{path.name}: {exc}") from exc
    try:
        source = parse_schema(doc["source_schema"])
        target = parse_schema(doc["target_schema"])
        expected = tuple(
            (m.get("source"), m.get("target"), m["kind"])
            for m in doc.get("expected_mismatches", [])
        )
        fixture = ScenarioFixture(
            id=int(doc["id"]),
            name=str(doc["name"]),
            protocol=str(doc.get("protocol", "rest")),
            source_schema=source,
            target_schema=target,
            input=doc["input"],
            golden=doc["golden"],
            expected_mismatches=expected,
            notes=str(doc.get("notes", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError(f"{path.name}: {exc}") from exc

    if fixture.protocol not in PROTOCOLS:
        raise FixtureError(f"{path.name}: unknown protocol {fixture.protocol!r}")
    violations = check_against_schema(fixture.input, source)
    if violations:
        raise FixtureError(f"{path.name}: input violates source schema: {violations[:3]}")
    violations = check_against_schema(fixture.golden, target)
    if violations:
        raise FixtureError(f"{path.name}: golden violates target schema: {violations[:3]}")
    return fixture


def load_scenarios(directory: str | FsPath | None = None) -> tuple[ScenarioFixture, ...]:
    base = FsPath(directory) if directory is not None else default_scenarios_dir()
    fixtures = [load_fixture(p) for p in sorted(base.glob("*.json"))]
    if not fixtures:
        raise FixtureError(f"no fixtures found in {base}")
    ids = [f.id for f in fixtures]
    if len(ids) != len(set(ids)):
        raise FixtureError("duplicate scenario ids")
    return tuple(sorted(fixtures, key=lambda f: f.id))


def route_for(fixture: ScenarioFixture, strategy: str = "CODEGEN",
              safeguards: bool = True) -> RouteConfig:
    """Route config exposing one fixture as a middleware route."""
    return RouteConfig(
        path_pattern=f"/api/scenario-{fixture.id:02d}",
        methods=frozenset({"POST"}),
        source_schema=fixture.source_schema,
        target_schema=fixture.target_schema,
        source_service=f"{fixture.name}-client",
        target_service=f"{fixture.name}-backend",
        strategy=strategy,
        safeguards_enabled=safeguards,
    )
