"""Model profiles: per-model request parameters, timeouts, and pricing.

Reasoning-class models take a reasoning-effort parameter and never a sampling
temperature; standard models get temperature 0.0 for determinism. Pricing is
configuration, not code: it changes faster than releases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping


class ProfileError(ValueError):
    """Profile definition violates the adaptation invariants."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass(frozen=True)
class ModelProfile:
    name: str
    provider: str
    reasoning: bool = False
    accepts_temperature: bool = True
    reasoning_effort: str | None = None
    timeout_s: int = 60
    price_per_million_input_tokens: float = 0.0
    price_per_million_output_tokens: float = 0.0

    def __post_init__(self):
        if self.reasoning and self.timeout_s < 120:
            raise ProfileError(f"{self.name}: reasoning profiles need timeout_s >= 120")
        if not self.reasoning and not self.accepts_temperature:
            raise ProfileError(f"{self.name}: standard profiles must accept temperature")

    def request_params(self) -> dict[str, Any]:
        """Sampling parameters to include in a completion request."""
        if self.reasoning:
            return {"reasoning_effort": self.reasoning_effort} if self.reasoning_effort else {}
        return {"temperature": 0.0}


def estimate_cost(usage: TokenUsage, profile: ModelProfile) -> float:
    """USD cost of a call: tokens times per-million pricing."""
    return (
        usage.input_tokens * profile.price_per_million_input_tokens / 1e6
        + usage.output_tokens * profile.price_per_million_output_tokens / 1e6
    )


def _profile_from_doc(doc: Mapping[str, Any]) -> ModelProfile:
    try:
        return ModelProfile(
            name=str(doc["name"]),
            provider=str(doc["provider"]),
            reasoning=bool(doc.get("reasoning", False)),
            accepts_temperature=bool(doc.get("accepts_temperature", not doc.get("reasoning", False))),
            reasoning_effort=doc.get("reasoning_effort"),
            timeout_s=int(doc.get("timeout_s", 120 if doc.get("reasoning") else 60)),
            price_per_million_input_tokens=float(doc.get("price_per_million_input_tokens", 0.0)),
            price_per_million_output_tokens=float(doc.get("price_per_million_output_tokens", 0.0)),
        )
    except KeyError as exc:
        raise ProfileError(f"profile missing field {exc}") from exc


def load_profiles(path: str | Path | None = None) -> dict[str, ModelProfile]:
    """Profiles from a JSON config file, or the packaged defaults."""
    if path is None:
        text = resources.files("schemabridge").joinpath("profiles.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    profiles = [_profile_from_doc(raw) for raw in doc.get("profiles", [])]
    return {p.name: p for p in profiles}


MOCK_PROFILE = ModelProfile(name="mock", provider="mock", reasoning=False,
                            accepts_temperature=True, timeout_s=60)
