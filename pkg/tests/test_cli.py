from __future__ import annotations

import json

import pytest

from schemabridge.cli import _build_client, build_parser
from schemabridge.gateway.mock import MockBackend


class TestParser:
    def test_bench_defaults(self):
        args = build_parser().parse_args(["bench"])
        assert args.strategy == "both"
        assert args.safeguards == "both"
        assert args.runs == 3
        assert args.backend == "mock"

    def test_serve_requires_config(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["serve"])

    def test_fault_flags(self):
        args = build_parser().parse_args(
            ["bench", "--fault-kind", "garbled", "--fault-rate", "0.5", "--seed", "7"])
        assert args.fault_kind == "garbled"
        assert args.fault_rate == 0.5
        assert args.seed == 7


class TestBuildClient:
    def test_mock_faithful(self):
        args = build_parser().parse_args(["bench"])
        client = _build_client(args)
        assert isinstance(client.backend, MockBackend)
        assert client.backend.mode == "faithful"
        assert len(client.backend.fixtures) == 10

    def test_mock_faulty_mode_from_rate(self):
        args = build_parser().parse_args(["bench", "--fault-rate", "0.3"])
        client = _build_client(args)
        assert client.backend.mode == "faulty"
        assert client.backend.fault_rate == 0.3

    def test_mock_outage_flag(self):
        args = build_parser().parse_args(["bench", "--outage"])
        assert _build_client(args).backend.mode == "outage"

    def test_unknown_model_rejected(self):
        args = build_parser().parse_args(["bench", "--model", "nonexistent"])
        with pytest.raises(SystemExit, match="nonexistent"):
            _build_client(args)

    def test_custom_profiles_file(self, tmp_path):
        profiles = {"profiles": [{
            "name": "own-model", "provider": "openai", "reasoning": False,
            "accepts_temperature": True, "timeout_s": 30,
            "price_per_million_input_tokens": 1.0,
            "price_per_million_output_tokens": 2.0,
        }]}
        file = tmp_path / "profiles.json"
        file.write_text(json.dumps(profiles), encoding="utf-8")
        args = build_parser().parse_args(
            ["bench", "--model", "own-model", "--profiles", str(file)])
        client = _build_client(args)
        assert client.profile.name == "own-model"
        assert client.profile.timeout_s == 30


class TestBenchCommand:
    def test_end_to_end_with_report_file(self, tmp_path, capsys):
        from schemabridge.cli import main

        out = tmp_path / "report.json"
        code = main(["bench", "--runs", "1", "--strategy", "codegen",
                     "--safeguards", "on", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "Per-scenario pass@1" in printed
        doc = json.loads(out.read_text())
        entry = doc["models"][0]
        assert entry["model"] == "mock"
        assert len(entry["runs"]) == 10
        assert all(run["passed"] for run in entry["runs"])
