from __future__ import annotations

import json

import pytest

from schemabridge.bench.fixtures import FixtureError, load_fixture
from schemabridge.bench.report import render_report
from schemabridge.bench.runner import BenchConfig, run_benchmark, run_one

from conftest import make_mock_client


class TestFixtures:
    def test_all_ten_load(self, scenarios):
        assert [f.id for f in scenarios] == list(range(1, 11))
        protocols = {f.protocol for f in scenarios}
        assert protocols == {"rest", "iot", "graphql"}

    def test_notes_record_derivations(self, scenarios):
        assert all(f.notes for f in scenarios)

    def test_invariant_input_vs_source(self, tmp_path):
        broken = {
            "id": 99, "name": "broken", "protocol": "rest",
            "source_schema": {"type": "object",
                              "properties": {"a": {"type": "integer"}},
                              "required": ["a"]},
            "target_schema": {"type": "object", "properties": {}},
            "input": {"a": "not-an-integer"},
            "golden": {},
            "expected_mismatches": [],
        }
        file = tmp_path / "99_broken.json"
        file.write_text(json.dumps(broken), encoding="utf-8")
        with pytest.raises(FixtureError, match="input violates source schema"):
            load_fixture(file)

    def test_invariant_golden_vs_target(self, tmp_path):
        broken = {
            "id": 98, "name": "broken", "protocol": "rest",
            "source_schema": {"type": "object", "properties": {}},
            "target_schema": {"type": "object",
                              "properties": {"x": {"type": "string"}},
                              "required": ["x"]},
            "input": {},
            "golden": {},
            "expected_mismatches": [],
        }
        file = tmp_path / "98_broken.json"
        file.write_text(json.dumps(broken), encoding="utf-8")
        with pytest.raises(FixtureError, match="golden violates target schema"):
            load_fixture(file)


class TestRunOne:
    def test_faithful_codegen_passes(self, scenarios):
        _, client = make_mock_client()
        result = run_one(scenarios[0], "CODEGEN", True, 1, client, 0.01, 3)
        assert result.passed
        assert result.field_f1 == 1.0
        assert result.value_accuracy == 1.0
        assert result.detection_recall == 1.0
        assert result.tier_used == "none"

    def test_outage_without_safeguards_fails_gracefully(self, scenarios):
        _, client = make_mock_client(mode="outage")
        result = run_one(scenarios[0], "CODEGEN", False, 1, client, 0.01, 3)
        assert not result.passed
        assert result.field_f1 == 0.0

    def test_outage_with_safeguards_completes(self, scenarios):
        _, client = make_mock_client(mode="outage")
        result = run_one(scenarios[0], "CODEGEN", True, 1, client, 0.01, 3)
        assert result.tier_used == "fallback"
        assert result.field_f1 > 0.0


class TestRunBenchmark:
    def test_counts_and_aggregates(self):
        _, client = make_mock_client()
        report = run_benchmark(BenchConfig(runs=3), client)
        assert len(report.runs) == 10 * 2 * 2 * 3
        # aggregate equals the recomputed mean of per-run booleans
        direct = [r for r in report.runs if r.strategy == "DIRECT"]
        assert report.mean_pass("DIRECT") == pytest.approx(
            sum(1.0 for r in direct if r.passed) / len(direct))
        for scenario_id in report.scenario_ids():
            for strategy in ("DIRECT", "CODEGEN"):
                assert report.per_scenario_pass(scenario_id, strategy) == 1.0

    def test_outage_runs_complete_without_abort(self):
        _, client = make_mock_client(mode="outage")
        report = run_benchmark(BenchConfig(runs=1, safeguard_modes=(True,)), client)
        assert len(report.runs) == 20
        assert all(r.tier_used == "fallback" for r in report.runs)

    def test_faulty_lift_strictly_positive(self):
        _, client = make_mock_client(mode="faulty", fault_kind="drop_field",
                                     fault_rate=0.5, seed=11)
        report = run_benchmark(BenchConfig(runs=3), client)
        assert report.safeguard_lift("DIRECT") > 0.0
        assert report.safeguard_lift("CODEGEN") > 0.0

    def test_parallel_mode_same_pass_rates(self):
        _, client = make_mock_client()
        report = run_benchmark(BenchConfig(runs=1, parallel=True), client)
        assert report.mean_pass() == 1.0


class TestRenderReport:
    def test_text_and_json_agree(self):
        _, client = make_mock_client()
        report = run_benchmark(BenchConfig(runs=1), client)
        text, doc = render_report(report)
        entry = doc["models"][0]
        assert entry["model"] == "mock"
        assert f"{entry['pass_at_1']['DIRECT']:.2f}" in text
        assert f"{entry['total_tokens']}" in text
        for row in entry["per_scenario_pass_at_1"]:
            assert row["name"] in text

    def test_layout_columns_present(self):
        _, client = make_mock_client()
        report = run_benchmark(BenchConfig(runs=1), client)
        text, doc = render_report(report)
        for column in ("Model", "Provider", "pass@1", "ValAcc", "MeanLat", "Cost"):
            assert column in text
        assert "Per-scenario pass@1" in text
        assert "P95" in text

    def test_empty_report_headers_only(self):
        from schemabridge.bench.runner import BenchmarkReport

        text, doc = render_report(BenchmarkReport(model="m", provider="p", runs=()))
        assert "Model" in text
        assert doc["models"][0]["per_scenario_pass_at_1"] == []

    def test_p95_equals_max_for_three_runs(self):
        from schemabridge.bench.runner import BenchmarkReport

        _, client = make_mock_client()
        report = run_benchmark(BenchConfig(runs=3, strategies=("CODEGEN",),
                                           safeguard_modes=(True,)), client)
        # one combination = 3 runs: the ceil-rank P95 is the maximum
        combo = BenchmarkReport(model="mock", provider="mock", runs=tuple(
            r for r in report.runs if r.scenario_id == 1))
        assert len(combo.runs) == 3
        assert combo.p95_latency_ms("CODEGEN") == max(r.total_ms for r in combo.runs)
        text, _ = render_report(report)
        assert "reduces to the maximum" in text
