"""Loader for the agent prompt assets shipped with the package.

Prompts live in ``funcforge/prompts/*.txt`` and use ``string.Template``
placeholders (``$name``) so embedded JSON braces never need escaping.  A
directory of same-named files can override any of them via config.
"""

from __future__ import annotations

import string
from importlib import resources
from pathlib import Path

from .errors import ConfigError


def load_prompt(name: str, override_dir: str | None = None) -> str:
    """Return the raw text of prompt asset ``name`` (without extension)."""
    if override_dir is not None:
        candidate = Path(override_dir) / f"{name}.txt"
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    ref = resources.files(__package__) / "prompts" / f"{name}.txt"
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"unknown prompt asset: {name}") from None


def render_prompt(name: str, override_dir: str | None = None, **fields: str) -> str:
    """Load prompt ``name`` and substitute its ``$field`` placeholders."""
    template = string.Template(load_prompt(name, override_dir))
    try:
        return template.substitute(**fields)
    except KeyError as exc:
        raise ConfigError(f"prompt {name} is missing a value for {exc}") from None
