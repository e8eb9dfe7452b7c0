"""Benchmark protocol: scenarios x strategies x safeguard modes x runs.

The mapping cache is disabled throughout so every run measures the cold path.
Individual scenario failures are recorded (pass=false) and the run continues;
only fixture invariant violations abort.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any

from ..detect import detect_semantic, detect_structural, merge_reports
from ..gateway.client import LlmClient
from ..gateway.profiles import estimate_cost
from ..resolve import ResolutionFailure, resolve
from ..safeguard import SafeguardContext, run_safeguards
from .fixtures import ScenarioFixture, load_scenarios, route_for
from .metrics import compare_outputs, detection_prf, field_f1, value_accuracy

logger = logging.getLogger(__name__)

STRATEGIES = ("DIRECT", "CODEGEN")


@dataclass(frozen=True)
class RunResult:
    scenario_id: int
    scenario_name: str
    strategy: str
    safeguards: bool
    run_index: int
    passed: bool
    field_f1: float
    value_accuracy: float
    detection_precision: float
    detection_recall: float
    detect_ms: float
    resolve_ms: float
    safeguard_ms: float
    llm_calls: int
    input_tokens: int
    output_tokens: int
    cost_usd: float
    tier_used: str = "none"
    diff: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("field_f1", "value_accuracy", "detection_precision", "detection_recall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def total_ms(self) -> float:
        return self.detect_ms + self.resolve_ms + self.safeguard_ms


@dataclass(frozen=True)
class BenchConfig:
    scenarios_dir: str | FsPath | None = None
    strategies: tuple[str, ...] = STRATEGIES
    safeguard_modes: tuple[bool, ...] = (True, False)
    runs: int = 3
    epsilon: float = 0.01
    ensemble_size: int = 3
    parallel: bool = False

    def __post_init__(self):
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise ValueError(f"unknown strategy {strategy!r}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


@dataclass(frozen=True)
class BenchmarkReport:
    """All run results plus aggregate views derived from them."""

    model: str
    provider: str
    runs: tuple[RunResult, ...]

    def _subset(self, strategy: str | None = None,
                safeguards: bool | None = None) -> list[RunResult]:
        return [
            r for r in self.runs
            if (strategy is None or r.strategy == strategy)
            and (safeguards is None or r.safeguards == safeguards)
        ]

    def mean_pass(self, strategy: str | None = None,
                  safeguards: bool | None = None) -> float:
        subset = self._subset(strategy, safeguards)
        if not subset:
            return 0.0
        return sum(1.0 for r in subset if r.passed) / len(subset)

    def mean_value_accuracy(self, strategy: str | None = None) -> float:
        subset = self._subset(strategy)
        if not subset:
            return 0.0
        return sum(r.value_accuracy for r in subset) / len(subset)

    def mean_latency_ms(self, strategy: str | None = None) -> float:
        subset = self._subset(strategy)
        if not subset:
            return 0.0
        return sum(r.total_ms for r in subset) / len(subset)

    def p95_latency_ms(self, strategy: str | None = None) -> float:
        # with n=3 runs per combination this reduces to the max; see rendering footnote
        values = sorted(r.total_ms for r in self._subset(strategy))
        if not values:
            return 0.0
        index = max(0, -(-len(values) * 95 // 100) - 1)
        return values[index]

    def safeguard_lift(self, strategy: str) -> float:
        return self.mean_pass(strategy, True) - self.mean_pass(strategy, False)

    def per_scenario_pass(self, scenario_id: int, strategy: str) -> float:
        subset = [r for r in self._subset(strategy) if r.scenario_id == scenario_id]
        if not subset:
            return 0.0
        return sum(1.0 for r in subset if r.passed) / len(subset)

    def scenario_ids(self) -> tuple[int, ...]:
        return tuple(sorted({r.scenario_id for r in self.runs}))

    def scenario_name(self, scenario_id: int) -> str:
        for r in self.runs:
            if r.scenario_id == scenario_id:
                return r.scenario_name
        return str(scenario_id)

    def total_tokens(self) -> int:
        return sum(r.input_tokens + r.output_tokens for r in self.runs)

    def total_cost(self) -> float:
        return sum(r.cost_usd for r in self.runs)


def run_one(fixture: ScenarioFixture, strategy: str, safeguards: bool, run_index: int,
            client: LlmClient, epsilon: float, ensemble_size: int) -> RunResult:
    """One scenario run, cold cache, isolated session."""
    route = route_for(fixture, strategy=strategy, safeguards=safeguards)
    session = client.session()

    t0 = time.perf_counter()
    structural = detect_structural(fixture.source_schema, fixture.target_schema)
    semantic = detect_semantic(session, fixture.source_schema, fixture.target_schema)
    report = merge_reports(structural, semantic)
    detect_ms = (time.perf_counter() - t0) * 1000.0

    t1 = time.perf_counter()
    outcome = None
    failure: ResolutionFailure | None = None
    try:
        outcome = resolve(route, fixture.input, report, session, cache=None)
    except ResolutionFailure as exc:
        failure = exc
    resolve_ms = (time.perf_counter() - t1) * 1000.0

    tier_used = "none"
    safeguard_ms = 0.0
    output: Any = outcome.output if outcome is not None else None
    if safeguards:
        t2 = time.perf_counter()
        ctx = SafeguardContext(route=route, data=fixture.input, report=report,
                               llm=session, n=ensemble_size)
        guarded = run_safeguards(outcome if outcome is not None else failure, ctx)
        safeguard_ms = (time.perf_counter() - t2) * 1000.0
        output = guarded.output
        tier_used = guarded.tier_used

    if output is None:
        passed, diffs = False, ("no output produced",)
        f1, acc = 0.0, 0.0
    else:
        comparison = compare_outputs(output, fixture.golden, epsilon)
        passed, diffs = comparison.passed, comparison.diffs
        f1 = field_f1(output, fixture.golden)
        acc = value_accuracy(output, fixture.golden, epsilon)

    precision, recall = detection_prf(report, fixture.expected_pairs())
    return RunResult(
        scenario_id=fixture.id,
        scenario_name=fixture.name,
        strategy=strategy,
        safeguards=safeguards,
        run_index=run_index,
        passed=passed,
        field_f1=f1,
        value_accuracy=acc,
        detection_precision=precision,
        detection_recall=recall,
        detect_ms=detect_ms,
        resolve_ms=resolve_ms,
        safeguard_ms=safeguard_ms,
        llm_calls=session.calls,
        input_tokens=session.usage.input_tokens,
        output_tokens=session.usage.output_tokens,
        cost_usd=estimate_cost(session.usage, client.profile),
        tier_used=tier_used,
        diff=diffs,
    )


def run_benchmark(config: BenchConfig, client: LlmClient) -> BenchmarkReport:
    """Drive the full protocol and aggregate a report."""
    fixtures = load_scenarios(config.scenarios_dir)
    combos = [
        (fixture, strategy, mode, index)
        for fixture in fixtures
        for strategy in config.strategies
        for mode in config.safeguard_modes
        for index in range(1, config.runs + 1)
    ]

    def one(combo) -> RunResult:
        fixture, strategy, mode, index = combo
        result = run_one(fixture, strategy, mode, index, client,
                         config.epsilon, config.ensemble_size)
        logger.debug("scenario %02d %s safeguards=%s run %d: pass=%s",
                     fixture.id, strategy, mode, index, result.passed)
        return result

    if config.parallel:
        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(one, combos))
    else:
        results = [one(combo) for combo in combos]

    return BenchmarkReport(
        model=client.profile.name,
        provider=client.profile.provider,
        runs=tuple(results),
    )
