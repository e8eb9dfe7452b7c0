"""Uniform structured-output client over pluggable backends.

The client renders prompts, issues completions with per-profile parameters,
verifies every response locally against its contract, and hands back verified
contract objects. Callers obtain a per-request session whose call and token
counters stay isolated even when the ensemble fans out across threads.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

from ..model import HashPair, Schema, SchemaHash, hash_pair
from .contracts import (
    AdapterProgramContract,
    MismatchReportContract,
    SchemaMappingContract,
    TransformedDataContract,
    verify_contract,
)
from .errors import ContractViolation, LlmFailure, Timeout, TransportError
from .profiles import ModelProfile, TokenUsage
from .prompts import PromptSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructuredRequest:
    """One completion request plus the context backends may key on."""

    profile: ModelProfile
    prompt: str
    contract: str
    pair: HashPair | None = None
    source: Schema | None = None
    target: Schema | None = None
    mapping_doc: Mapping[str, Any] | None = None
    payload: Mapping[str, Any] | None = None


class Backend(Protocol):
    def complete_structured(self, request: StructuredRequest) -> tuple[Any, TokenUsage]:
        """Return (raw response document, token usage) or raise an LlmFailure."""
        ...


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


def _pair_from_doc(doc: Mapping[str, Any] | None) -> HashPair | None:
    if not doc:
        return None
    raw = doc.get("pair")
    if not isinstance(raw, Mapping):
        return None
    try:
        return (
            SchemaHash(bytes.fromhex(raw["source"])),
            SchemaHash(bytes.fromhex(raw["target"])),
        )
    except (KeyError, ValueError):
        return None


class LlmClient:
    """Backend plus profile plus prompt set; issue sessions per request."""

    def __init__(
        self,
        backend: Backend,
        profile: ModelProfile,
        prompts: PromptSet,
        max_concurrency: int = 8,
        timeout_retries: int = 1,
        retry_backoff_s: float = 0.0,
    ):
        self.backend = backend
        self.profile = profile
        self.prompts = prompts
        self.timeout_retries = timeout_retries
        self.retry_backoff_s = retry_backoff_s
        self._gate = threading.BoundedSemaphore(max_concurrency)

    def session(self) -> "LlmSession":
        return LlmSession(self)

    def complete_structured(self, request: StructuredRequest) -> tuple[Any, TokenUsage]:
        """One verified completion; retries once on Timeout/TransportError only."""
        attempts = 1 + self.timeout_retries
        usage_total = TokenUsage()
        last: LlmFailure | None = None
        for attempt in range(attempts):
            try:
                with self._gate:
                    doc, usage = self.backend.complete_structured(request)
                usage_total = usage_total + usage
                verified = verify_contract(request.contract, doc)
                return verified, usage_total
            except ContractViolation:
                raise
            except (Timeout, TransportError) as exc:
                last = exc
                if attempt + 1 < attempts:
                    logger.debug("retrying %s after %s", request.contract, exc)
                    if self.retry_backoff_s:
                        time.sleep(self.retry_backoff_s)
        assert last is not None
        raise last


@dataclass
class LlmSession:
    """Per-request view of the client with isolated call/usage accounting."""

    client: LlmClient
    calls: int = 0
    usage: TokenUsage = field(default_factory=TokenUsage)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _run(self, request: StructuredRequest) -> Any:
        with self._lock:
            self.calls += 1
        verified, usage = self.client.complete_structured(request)
        with self._lock:
            self.usage = self.usage + usage
        return verified

    def detect_mismatches(self, source: Schema, target: Schema) -> MismatchReportContract:
        prompt = self.client.prompts.render(
            "detect_mismatch", source_schema=source.raw, target_schema=target.raw
        )
        return self._run(
            StructuredRequest(
                profile=self.client.profile,
                prompt=prompt,
                contract="MismatchReport",
                pair=hash_pair(source, target),
                source=source,
                target=target,
            )
        )

    def generate_mapping(
        self, source: Schema, target: Schema, report_doc: Mapping[str, Any]
    ) -> SchemaMappingContract:
        prompt = self.client.prompts.render(
            "generate_mapping",
            source_schema=source.raw,
            target_schema=target.raw,
            mismatch_report=_dumps(report_doc),
        )
        return self._run(
            StructuredRequest(
                profile=self.client.profile,
                prompt=prompt,
                contract="SchemaMapping",
                pair=hash_pair(source, target),
                source=source,
                target=target,
            )
        )

    def generate_adapter(
        self, source: Schema, target: Schema, mapping_doc: Mapping[str, Any]
    ) -> AdapterProgramContract:
        prompt = self.client.prompts.render(
            "generate_adapter",
            source_schema=source.raw,
            target_schema=target.raw,
            mapping=_dumps(mapping_doc.get("fields", [])),
        )
        return self._run(
            StructuredRequest(
                profile=self.client.profile,
                prompt=prompt,
                contract="AdapterProgram",
                pair=hash_pair(source, target),
                source=source,
                target=target,
                mapping_doc=mapping_doc,
            )
        )

    def transform_data(
        self, mapping_doc: Mapping[str, Any], data: Mapping[str, Any]
    ) -> TransformedDataContract:
        prompt = self.client.prompts.render(
            "transform_data",
            mapping=_dumps(mapping_doc.get("fields", [])),
            data=_dumps(data),
        )
        return self._run(
            StructuredRequest(
                profile=self.client.profile,
                prompt=prompt,
                contract="TransformedData",
                pair=_pair_from_doc(mapping_doc),
                mapping_doc=mapping_doc,
                payload=data,
            )
        )
