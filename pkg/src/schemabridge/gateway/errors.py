"""Failure taxonomy for model calls.

ContractViolation is deliberately not retried at this layer: repairing bad
model output is what the ensemble safeguard tier is for.
"""

from __future__ import annotations


class LlmFailure(Exception):
    """Base class: a structured completion could not be obtained."""


class Timeout(LlmFailure):
    """The call exceeded the profile's timeout."""


class TransportError(LlmFailure):
    """Network or provider-side failure before a response was produced."""


class ContractViolation(LlmFailure):
    """The response failed local verification against its contract."""


class MissingFixture(LlmFailure):
    """Mock backend has no canned response for the requested schema pair."""
