"""Structured-output contracts the model must satisfy, one per response kind.

Responses are verified locally against these models even when the provider
claims schema-constrained decoding; the pipeline never sees an unverified
shape.
"""

from __future__ import annotations

from typing import Any, Literal, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..adapter import AdapterDecodeError, program_from_json
from ..model import Path
from .errors import ContractViolation

CONTRACT_KINDS = ("MismatchReport", "SchemaMapping", "AdapterProgram", "TransformedData")


class MismatchEntryContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    kind: Literal[
        "field_missing",
        "field_extra",
        "type_mismatch",
        "nesting_mismatch",
        "cardinality_mismatch",
        "naming_mismatch",
        "unit_mismatch",
    ]
    source_path: str | None = None
    target_path: str | None = None
    source_type: str | None = None
    target_type: str | None = None
    detail: str = ""
    severity: Literal["low", "medium", "high"] = "medium"

    @model_validator(mode="after")
    def _check_paths(self) -> "MismatchEntryContract":
        if self.source_path is None and self.target_path is None:
            raise ValueError("mismatch entry needs at least one path")
        for text in (self.source_path, self.target_path):
            if text is not None:
                Path.parse(text)
        return self


class MismatchReportContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    mismatches: list[MismatchEntryContract] = Field(default_factory=list)


class FieldMappingContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    source_path: str | None = None
    target_path: str
    transform: str = "identity"
    confidence: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_paths(self) -> "FieldMappingContract":
        Path.parse(self.target_path)
        if self.source_path is not None:
            Path.parse(self.source_path)
        if not self.transform:
            raise ValueError("transform must be non-empty")
        return self


class SchemaMappingContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    fields: list[FieldMappingContract] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_targets(self) -> "SchemaMappingContract":
        targets = [f.target_path for f in self.fields]
        if len(targets) != len(set(targets)):
            raise ValueError("duplicate target_path in mapping")
        return self


class AdapterProgramContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    assignments: list[dict[str, Any]]

    @model_validator(mode="after")
    def _parses(self) -> "AdapterProgramContract":
        try:
            program_from_json({"assignments": self.assignments})
        except AdapterDecodeError as exc:
            raise ValueError(str(exc)) from exc
        return self


class TransformedDataContract(BaseModel):
    model_config = ConfigDict(extra="ignore")

    output: dict[str, Any]


_CONTRACT_MODELS: Mapping[str, type[BaseModel]] = {
    "MismatchReport": MismatchReportContract,
    "SchemaMapping": SchemaMappingContract,
    "AdapterProgram": AdapterProgramContract,
    "TransformedData": TransformedDataContract,
}


def contract_model(kind: str) -> type[BaseModel]:
    try:
        return _CONTRACT_MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown contract kind {kind!r}") from None


def verify_contract(kind: str, doc: Any) -> BaseModel:
    """Parse and verify a raw response document against its contract."""
    model = contract_model(kind)
    try:
        return model.model_validate(doc)
    except ValidationError as exc:
        raise ContractViolation(f"{kind}: {exc.errors()[:3]}") from exc


def contract_json_schema(kind: str) -> dict[str, Any]:
    """JSON Schema handed to providers that support schema-constrained output."""
    return contract_model(kind).model_json_schema()
