from __future__ import annotations

import pytest

from schemabridge.bench.fixtures import default_scenarios_dir, load_scenarios
from schemabridge.gateway.client import LlmClient
from schemabridge.gateway.mock import MockBackend
from schemabridge.gateway.profiles import MOCK_PROFILE
from schemabridge.gateway.prompts import load_prompts

PROMPTS = load_prompts()


def make_mock_client(mode: str = "faithful", fault_kind: str = "drop_field",
                     fault_rate: float = 0.0, seed: int = 0,
                     **client_kwargs) -> tuple[MockBackend, LlmClient]:
    """Fresh backend + client so call counters stay isolated per test."""
    backend = MockBackend.from_directory(
        default_scenarios_dir(), mode=mode, fault_kind=fault_kind,
        fault_rate=fault_rate, seed=seed,
    )
    client = LlmClient(backend, MOCK_PROFILE, PROMPTS, **client_kwargs)
    return backend, client


class EchoForwarder:
    """Fake target service: records what it saw and echoes the body back."""

    def __init__(self):
        self.seen: list[tuple[str, str, str, dict, bytes]] = []

    def forward(self, service, method, path, headers, body):
        self.seen.append((service, method, path, dict(headers), bytes(body)))
        return 200, {"content-type": "application/json"}, bytes(body)

    @property
    def last_body(self) -> bytes:
        return self.seen[-1][4]


@pytest.fixture(scope="session")
def scenarios():
    return load_scenarios()


@pytest.fixture(scope="session")
def weather(scenarios):
    return scenarios[0]


@pytest.fixture
def faithful_client():
    return make_mock_client()


@pytest.fixture
def echo_forwarder():
    return EchoForwarder()
