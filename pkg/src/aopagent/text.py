"""Shared tokenizer and token-count approximation."""

import re

_WORD = re.compile(r"\w+", re.UNICODE)

CHARS_PER_TOKEN = 4


def tokenize(text: str) -> list[str]:
    """Lowercase Unicode word split; no stemming, no stopwords."""
    return _WORD.findall(text.lower())


def approx_tokens(text: str) -> int:
    return (len(text) + CHARS_PER_TOKEN - 1) // CHARS_PER_TOKEN
