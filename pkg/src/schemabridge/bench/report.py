"""Report rendering: one cross-model results table, one per-scenario table.

The JSON document is built first and the text tables are rendered from it, so
the two views agree on every number by construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from typing import Any, Sequence

from .runner import BenchmarkReport, STRATEGIES

P95_FOOTNOTE = ("P95 uses the ceil-rank percentile; over 3 runs per "
                "combination it reduces to the maximum.")


def report_to_doc(reports: Sequence[BenchmarkReport]) -> dict[str, Any]:
    models = []
    for report in reports:
        strategies = {s: None for s in STRATEGIES}
        entry: dict[str, Any] = {
            "model": report.model,
            "provider": report.provider,
            "pass_at_1": dict(strategies),
            "value_accuracy": dict(strategies),
            "mean_latency_ms": dict(strategies),
            "p95_latency_ms": dict(strategies),
            "safeguard_lift": dict(strategies),
            "total_tokens": report.total_tokens(),
            "total_cost_usd": round(report.total_cost(), 6),
            "per_scenario_pass_at_1": [],
            "runs": [asdict(r) for r in report.runs],
        }
        present = {r.strategy for r in report.runs}
        for strategy in present:
            entry["pass_at_1"][strategy] = round(report.mean_pass(strategy), 4)
            entry["value_accuracy"][strategy] = round(report.mean_value_accuracy(strategy), 4)
            entry["mean_latency_ms"][strategy] = round(report.mean_latency_ms(strategy), 3)
            entry["p95_latency_ms"][strategy] = round(report.p95_latency_ms(strategy), 3)
            entry["safeguard_lift"][strategy] = round(report.safeguard_lift(strategy), 4)
        for scenario_id in report.scenario_ids():
            row = {"id": scenario_id, "name": report.scenario_name(scenario_id)}
            for strategy in present:
                row[strategy] = round(report.per_scenario_pass(scenario_id, strategy), 4)
            entry["per_scenario_pass_at_1"].append(row)
        models.append(entry)
    return {"models": models, "footnotes": [P95_FOOTNOTE]}


def _fmt(value: Any, spec: str = ".2f", empty: str = "-") -> str:
    if value is None:
        return empty
    return format(value, spec)


def render_text(doc: dict[str, Any]) -> str:
    lines: list[str] = []
    header = (
        f"{'Model':<22} {'Provider':<10} "
        f"{'pass@1 D':>9} {'C':>6} {'ValAcc D':>9} {'C':>6} "
        f"{'MeanLat(ms) D':>14} {'C':>10} {'Tokens':>9} {'Cost($)':>9}"
    )
    lines.append("Cross-model results (mean over scenarios, all runs)")
    lines.append(header)
    lines.append("-" * len(header))
    for entry in doc["models"]:
        lines.append(
            f"{entry['model']:<22} {entry['provider']:<10} "
            f"{_fmt(entry['pass_at_1'].get('DIRECT')):>9} "
            f"{_fmt(entry['pass_at_1'].get('CODEGEN')):>6} "
            f"{_fmt(entry['value_accuracy'].get('DIRECT')):>9} "
            f"{_fmt(entry['value_accuracy'].get('CODEGEN')):>6} "
            f"{_fmt(entry['mean_latency_ms'].get('DIRECT'), '.1f'):>14} "
            f"{_fmt(entry['mean_latency_ms'].get('CODEGEN'), '.1f'):>10} "
            f"{entry['total_tokens']:>9} "
            f"{entry['total_cost_usd']:>9.4f}"
        )
    lines.append("")
    for entry in doc["models"]:
        lines.append(f"Per-scenario pass@1 [{entry['model']}]")
        lines.append(f"{'#':>3} {'Scenario':<32} {'D':>6} {'C':>6}")
        lines.append("-" * 50)
        for row in entry["per_scenario_pass_at_1"]:
            lines.append(
                f"{row['id']:>3} {row['name']:<32} "
                f"{_fmt(row.get('DIRECT')):>6} {_fmt(row.get('CODEGEN')):>6}"
            )
        lift = entry["safeguard_lift"]
        lines.append(
            "safeguard lift: "
            + ", ".join(
                f"{s}={_fmt(lift.get(s), '+.2f')}" for s in STRATEGIES if lift.get(s) is not None
            )
        )
        lines.append(
            f"P95 latency (ms): "
            + ", ".join(
                f"{s}={_fmt(entry['p95_latency_ms'].get(s), '.1f')}"
                for s in STRATEGIES if entry["p95_latency_ms"].get(s) is not None
            )
        )
        lines.append("")
    for note in doc["footnotes"]:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def render_report(reports: BenchmarkReport | Sequence[BenchmarkReport]) -> tuple[str, dict[str, Any]]:
    """Return (text tables, JSON document) for one or more model reports."""
    if isinstance(reports, BenchmarkReport):
        reports = [reports]
    doc = report_to_doc(reports)
    return render_text(doc), doc


def write_report(reports: BenchmarkReport | Sequence[BenchmarkReport], path: str) -> str:
    text, doc = render_report(reports)
    with open(path, "w", encoding="utf-8") as sink:
        json.dump(doc, sink, indent=2)
    return text
