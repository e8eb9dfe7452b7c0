"""ASGI surface: a catch-all proxy app over the middleware core."""

from __future__ import annotations

from typing import Mapping

import httpx
from starlette.applications import Starlette
from starlette.concurrency import run_in_threadpool
from starlette.requests import Request
from starlette.responses import Response
from starlette.routing import Route

from .middleware import ForwardError, Middleware

_SKIP_RESPONSE_HEADERS = frozenset(
    {"content-length", "transfer-encoding", "connection", "content-encoding"}
)


class HttpForwarder:
    """Forwards to a target service given as host:port or a full base URL."""

    def __init__(self, timeout_s: float = 30.0):
        self._client = httpx.Client(timeout=timeout_s)

    def forward(self, service: str, method: str, path: str,
                headers: Mapping[str, str], body: bytes) -> tuple[int, dict[str, str], bytes]:
        if not service:
            raise ForwardError("no target service configured for this path")
        base = service if "://" in service else f"http://{service}"
        url = base.rstrip("/") + path
        try:
            response = self._client.request(method, url, headers=dict(headers), content=body)
        except httpx.HTTPError as exc:
            raise ForwardError(str(exc)) from exc
        return response.status_code, dict(response.headers), response.content

    def close(self) -> None:
        self._client.close()


def build_asgi_app(core: Middleware) -> Starlette:
    async def dispatch(request: Request) -> Response:
        body = await request.body()
        status, headers, payload = await run_in_threadpool(
            core.handle_request,
            request.method,
            request.url.path,
            dict(request.headers),
            body,
        )
        clean = {k: v for k, v in headers.items() if k.lower() not in _SKIP_RESPONSE_HEADERS}
        return Response(content=payload, status_code=status, headers=clean)

    return Starlette(
        routes=[
            Route(
                "/{rest:path}",
                dispatch,
                methods=["GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"],
            )
        ]
    )
