"""Request interception and pipeline orchestration (input and monitoring layers).

Only POST/PUT/PATCH bodies on registered routes run the
detect -> resolve -> safeguard pipeline; everything else is forwarded
byte-identical. One metrics record is appended per request; metrics failures
never fail the request.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path as FsPath
from typing import Mapping, Protocol

from .detect import MismatchReport, detect_semantic, detect_structural, merge_reports
from .gateway.client import LlmClient
from .gateway.profiles import TokenUsage, estimate_cost
from .model import SchemaRegistry, TRANSFORMABLE_METHODS, hash_pair, match_route
from .resolve import MappingCache, ResolutionFailure, resolve
from .safeguard import SafeguardContext, run_safeguards
from .units import UnitRegistry

logger = logging.getLogger(__name__)

_HOP_HEADERS = frozenset(
    {"connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
     "te", "trailers", "transfer-encoding", "upgrade", "host", "content-length"}
)


class ForwardError(Exception):
    """Target service unreachable or refused the connection."""


class Forwarder(Protocol):
    def forward(self, service: str, method: str, path: str,
                headers: Mapping[str, str], body: bytes) -> tuple[int, dict[str, str], bytes]:
        ...


@dataclass
class RequestRecord:
    """One line of the metrics log."""

    route: str | None
    method: str
    path: str
    outcome: str  # transformed | passthrough | degraded
    status: int
    detect_ms: float = 0.0
    resolve_ms: float = 0.0
    safeguard_ms: float = 0.0
    llm_calls: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    cost_usd: float = 0.0
    tier_used: str = "none"
    cache_hit: bool = False
    semantic_degraded: bool = False

    def __post_init__(self):
        for name in ("detect_ms", "resolve_ms", "safeguard_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.outcome == "passthrough" and (
            self.detect_ms or self.resolve_ms or self.safeguard_ms
        ):
            raise ValueError("passthrough records must have zero stage durations")


class MetricsSink:
    """Append-only JSONL sink plus in-memory trigger counters."""

    def __init__(self, path: str | FsPath | None = None):
        self.path = FsPath(path) if path else None
        self._lock = threading.Lock()
        self.records: list[RequestRecord] = []
        self.counters: dict[str, int] = {
            "requests": 0,
            "transformed": 0,
            "passthrough": 0,
            "degraded": 0,
            "ensemble_triggered": 0,
            "fallback_triggered": 0,
        }

    def append(self, record: RequestRecord) -> None:
        with self._lock:
            self.records.append(record)
            self.counters["requests"] += 1
            self.counters[record.outcome] = self.counters.get(record.outcome, 0) + 1
            if record.tier_used in ("ensemble", "fallback"):
                self.counters["ensemble_triggered"] += 1
            if record.tier_used == "fallback":
                self.counters["fallback_triggered"] += 1
            if self.path is not None:
                try:
                    with self.path.open("a", encoding="utf-8") as sink:
                        sink.write(json.dumps(asdict(record)) + "\n")
                except OSError as exc:
                    logger.error("metrics write failed: %s", exc)

    def trigger_rate(self, counter: str) -> float:
        with self._lock:
            attempted = self.counters["transformed"] + self.counters["degraded"]
            if attempted == 0:
                return 0.0
            return self.counters[counter] / attempted


def record_metrics(sink: MetricsSink, record: RequestRecord) -> None:
    sink.append(record)


class Middleware:
    """Transparent request-transforming proxy core, independent of the HTTP server."""

    def __init__(
        self,
        registry: SchemaRegistry,
        client: LlmClient,
        forwarder: Forwarder,
        cache: MappingCache | None = None,
        metrics: MetricsSink | None = None,
        ensemble_size: int = 3,
        default_service: str = "",
    ):
        self.registry = registry
        self.client = client
        self.forwarder = forwarder
        self.cache = cache if cache is not None else MappingCache()
        self.metrics = metrics if metrics is not None else MetricsSink()
        self.ensemble_size = ensemble_size
        self.default_service = default_service or registry.default_service
        self.units = UnitRegistry(registry.extra_units)

    # -- helpers ---------------------------------------------------------

    def _destination(self, path: str) -> str:
        for route in self.registry.routes:
            pattern = route.path_pattern.rstrip("/") or "/"
            if path == pattern or path.startswith(pattern + "/") or pattern == "/":
                return route.target_service or self.default_service
        return self.default_service

    def _forward(self, service: str, method: str, path: str,
                 headers: Mapping[str, str], body: bytes) -> tuple[int, dict[str, str], bytes]:
        clean = {k: v for k, v in headers.items() if k.lower() not in _HOP_HEADERS}
        return self.forwarder.forward(service, method, path, clean, body)

    @staticmethod
    def _error(status: int, message: str) -> tuple[int, dict[str, str], bytes]:
        body = json.dumps({"error": message}).encode("utf-8")
        return status, {"content-type": "application/json"}, body

    # -- entry point -----------------------------------------------------

    def handle_request(self, method: str, path: str, headers: Mapping[str, str],
                       body: bytes) -> tuple[int, dict[str, str], bytes]:
        """Intercept one request; returns the backend's (status, headers, body)."""
        method = method.upper()
        route = match_route(self.registry, method, path)
        if route is None or method not in TRANSFORMABLE_METHODS:
            return self._passthrough(method, path, headers, body)

        try:
            data = json.loads(body.decode("utf-8")) if body else None
        except (UnicodeDecodeError, json.JSONDecodeError):
            data = None
        if not isinstance(data, dict):
            self.metrics.append(RequestRecord(
                route=route.path_pattern, method=method, path=path,
                outcome="passthrough", status=400,
            ))
            return self._error(400, "request body must be a JSON object")

        session = self.client.session()
        record = RequestRecord(route=route.path_pattern, method=method, path=path,
                               outcome="transformed", status=0)

        t0 = time.perf_counter()
        structural = detect_structural(route.source_schema, route.target_schema)
        pair = hash_pair(route.source_schema, route.target_schema)
        if self.cache.get(pair) is None:
            semantic = detect_semantic(session, route.source_schema, route.target_schema)
        else:
            # warm pair: resolution replays the cached entry, so the semantic
            # pass is skipped and the warm path stays at zero model calls
            semantic = MismatchReport(pair=pair)
        report = merge_reports(structural, semantic)
        record.detect_ms = (time.perf_counter() - t0) * 1000.0
        record.semantic_degraded = report.degraded

        t1 = time.perf_counter()
        failure: ResolutionFailure | None = None
        outcome = None
        try:
            outcome = resolve(route, data, report, session, self.cache)
            record.cache_hit = outcome.cache_hit
        except ResolutionFailure as exc:
            failure = exc
            logger.info("resolution failed on %s: %s", route.path_pattern, exc)
        record.resolve_ms = (time.perf_counter() - t1) * 1000.0

        t2 = time.perf_counter()
        if route.safeguards_enabled:
            ctx = SafeguardContext(
                route=route, data=data, report=report, llm=session,
                n=self.ensemble_size, units=self.units,
            )
            guarded = run_safeguards(outcome if outcome is not None else failure, ctx)
            output = guarded.output
            record.tier_used = guarded.tier_used
            if guarded.tier_used != "none":
                record.outcome = "degraded"
        elif outcome is not None:
            output = outcome.output
        else:
            record.safeguard_ms = (time.perf_counter() - t2) * 1000.0
            record.outcome = "degraded"
            record.status = 502
            self._finish(record, session)
            return self._error(502, f"resolution failed and safeguards are disabled: {failure}")
        record.safeguard_ms = (time.perf_counter() - t2) * 1000.0

        new_body = json.dumps(output).encode("utf-8")
        out_headers = dict(headers)
        out_headers["content-type"] = "application/json"
        try:
            status, resp_headers, resp_body = self._forward(
                route.target_service, method, path, out_headers, new_body
            )
        except ForwardError as exc:
            record.status = 502
            self._finish(record, session)
            return self._error(502, f"target service unreachable: {exc}")
        record.status = status
        self._finish(record, session)
        return status, resp_headers, resp_body

    def _passthrough(self, method: str, path: str, headers: Mapping[str, str],
                     body: bytes) -> tuple[int, dict[str, str], bytes]:
        try:
            status, resp_headers, resp_body = self._forward(
                self._destination(path), method, path, headers, body
            )
        except ForwardError as exc:
            self.metrics.append(RequestRecord(route=None, method=method, path=path,
                                              outcome="passthrough", status=502))
            return self._error(502, f"target service unreachable: {exc}")
        self.metrics.append(RequestRecord(route=None, method=method, path=path,
                                          outcome="passthrough", status=status))
        return status, resp_headers, resp_body

    def _finish(self, record: RequestRecord, session) -> None:
        record.llm_calls = session.calls
        usage: TokenUsage = session.usage
        record.input_tokens = usage.input_tokens
        record.output_tokens = usage.output_tokens
        record.cost_usd = estimate_cost(usage, self.client.profile)
        self.metrics.append(record)
