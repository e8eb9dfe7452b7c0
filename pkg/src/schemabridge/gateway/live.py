"""HTTP backend speaking the chat-completions JSON convention.

Credentials and endpoints come from the environment, per provider:
``<PROVIDER>_API_KEY`` and ``<PROVIDER>_BASE_URL`` (e.g. ``OPENAI_API_KEY``).
Responses are requested in schema-constrained mode where the endpoint supports
it, but local contract verification happens regardless (in the client).
"""

from __future__ import annotations

import json
import logging
import os
from typing import Any

import httpx

from .client import StructuredRequest
from .contracts import contract_json_schema
from .errors import TransportError, Timeout
from .profiles import TokenUsage

logger = logging.getLogger(__name__)

DEFAULT_BASE_URLS = {
    "openai": "https://api.openai.com/v1",
    "xai": "https://api.x.ai/v1",
}


class LiveBackend:
    """Synchronous chat-completions client; one instance per provider."""

    def __init__(self, provider: str, api_key: str | None = None,
                 base_url: str | None = None,
                 transport: httpx.BaseTransport | None = None):
        env = provider.upper().replace("-", "_")
        self.provider = provider
        self.api_key = api_key or os.environ.get(f"{env}_API_KEY", "")
        self.base_url = (
            base_url
            or os.environ.get(f"{env}_BASE_URL")
            or DEFAULT_BASE_URLS.get(provider, "")
        )
        if not self.base_url:
            raise ValueError(f"no base URL configured for provider {provider!r}")
        self._client = httpx.Client(
            base_url=self.base_url,
            headers={"Authorization": f"Bearer {self.api_key}"},
            transport=transport,
        )

    def build_body(self, request: StructuredRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": request.profile.name,
            "messages": [{"role": "user", "content": request.prompt}],
            "response_format": {
                "type": "json_schema",
                "json_schema": {
                    "name": request.contract,
                    "schema": contract_json_schema(request.contract),
                },
            },
        }
        body.update(request.profile.request_params())
        return body

    def complete_structured(self, request: StructuredRequest) -> tuple[Any, TokenUsage]:
        body = self.build_body(request)
        try:
            response = self._client.post(
                "/chat/completions", json=body, timeout=request.profile.timeout_s
            )
        except httpx.TimeoutException as exc:
            raise Timeout(f"{request.contract}: {exc}") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"{request.contract}: {exc}") from exc
        if response.status_code >= 400:
            raise TransportError(
                f"{request.contract}: HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
            doc = json.loads(content)
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"{request.contract}: malformed response: {exc}") from exc
        usage = data.get("usage", {})
        return doc, TokenUsage(
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
        )

    def close(self) -> None:
        self._client.close()
