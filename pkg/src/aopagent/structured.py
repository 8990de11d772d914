"""Extraction of fenced JSON blocks from free-form model output."""

from __future__ import annotations

import json
import re

_FENCE = re.compile(r"```(?:json)?\s*\n?(.*?)```", re.DOTALL | re.IGNORECASE)


class ParseError(ValueError):
    pass


def extract_json_object(text: str) -> dict:
    """Return the last fenced JSON object in ``text``.

    Falls back to the outermost ``{...}`` span when the model forgot the fence.
    """
    candidates = [m.group(1).strip() for m in _FENCE.finditer(text)]
    if not candidates:
        lo, hi = text.find("{"), text.rfind("}")
        if lo == -1 or hi <= lo:
            raise ParseError("no JSON block found")
        candidates = [text[lo : hi + 1]]
    err: Exception | None = None
    for body in reversed(candidates):
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as exc:
            err = exc
            continue
        if isinstance(obj, dict):
            return obj
        err = ParseError("JSON block is not an object")
    raise ParseError(f"invalid JSON block: {err}")


def fenced(obj) -> str:
    return "```json\n" + json.dumps(obj, ensure_ascii=False, indent=2) + "\n```"
