"""Prompt assets, one text file per (strategy, stage)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

CATALOG_VERSION = "1"

PROMPT_NAMES = (
    "oneshot_system",
    "oneshot_instruction",
    "oneshot_user",
    "react_system",
    "react_user",
    "react_observation",
    "agentic_system",
    "agentic_identifier",
    "agentic_mapper",
    "agentic_structurer",
    "agentic_validator",
)


class PromptCatalog:
    """Loads prompt text, preferring files in ``override_dir`` over the packaged ones."""

    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, str] = {}

    def get(self, name: str) -> str:
        if name not in PROMPT_NAMES:
            raise KeyError(f"unknown prompt {name!r}")
        if name not in self._cache:
            if self.override_dir and (self.override_dir / f"{name}.txt").exists():
                text = (self.override_dir / f"{name}.txt").read_text(encoding="utf-8")
            else:
                text = resources.files("orderpipe.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
            self._cache[name] = text
        return self._cache[name]

    def render(self, name: str, **values) -> str:
        return self.get(name).format(**values)


DEFAULT_CATALOG = PromptCatalog()
