"""Benchmark harness: fixtures, metrics, run protocol, report rendering."""

from .fixtures import FixtureError, ScenarioFixture, default_scenarios_dir, load_fixture, load_scenarios, route_for
from .metrics import ComparisonResult, compare_outputs, detection_prf, field_f1, value_accuracy
from .report import render_report, write_report
from .runner import BenchConfig, BenchmarkReport, RunResult, run_benchmark, run_one

__all__ = [
    "BenchConfig",
    "BenchmarkReport",
    "ComparisonResult",
    "FixtureError",
    "RunResult",
    "ScenarioFixture",
    "compare_outputs",
    "default_scenarios_dir",
    "detection_prf",
    "field_f1",
    "load_fixture",
    "load_scenarios",
    "render_report",
    "route_for",
    "run_benchmark",
    "run_one",
    "value_accuracy",
    "write_report",
]
