"""Prompt templates: four plain-text files, editable without code changes."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

PROMPT_NAMES = ("detect_mismatch", "generate_mapping", "generate_adapter", "transform_data")


class MissingPrompt(FileNotFoundError):
    """A required prompt file is absent from the prompt directory."""


class RenderError(KeyError):
    """Template references a placeholder the call did not provide."""


@dataclass(frozen=True)
class PromptSet:
    detect_mismatch: str
    generate_mapping: str
    generate_adapter: str
    transform_data: str

    def render(self, name: str, **values: str) -> str:
        if name not in PROMPT_NAMES:
            raise ValueError(f"unknown prompt {name!r}")
        template: str = getattr(self, name)
        try:
            return template.format(**values)
        except (KeyError, IndexError, ValueError) as exc:
            raise RenderError(f"prompt {name}: unresolvable placeholder ({exc})") from exc


def default_prompts_dir() -> Path:
    return Path(str(resources.files("schemabridge").joinpath("prompts")))


def load_prompts(directory: str | Path | None = None) -> PromptSet:
    """Load all four templates; a missing file is an error naming the file."""
    base = Path(directory) if directory is not None else default_prompts_dir()
    texts: dict[str, str] = {}
    for name in PROMPT_NAMES:
        file = base / f"{name}.txt"
        if not file.is_file():
            raise MissingPrompt(f"{name}.txt")
        texts[name] = file.read_text(encoding="utf-8")
    return PromptSet(**texts)
