"""Prompt templates shipped as editable text assets.

Templates use ``{name}`` placeholders. Substitution is literal, so JSON
examples with braces inside a template are left alone.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

PLACEHOLDERS = (
    "question",
    "options",
    "global_description",
    "working_memory",
    "evidence",
    "observation",
    "current_plan",
    "tools",
    "segment",
    "transcript",
    "descriptions",
    "round",
    "max_rounds",
)


@lru_cache(maxsize=None)
def _packaged(name: str) -> str:
    return resources.files("aopagent").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")


def load_prompt(name: str, prompts_dir: str | Path | None = None) -> str:
    """Load template ``name``; a file in ``prompts_dir`` overrides the packaged one."""
    if prompts_dir is not None:
        path = Path(prompts_dir) / f"{name}.txt"
        if path.is_file():
            return path.read_text(encoding="utf-8")
    return _packaged(name)


def render(template: str, **values) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", str(value))
    return out
