"""Shared text analysis: the one tokenizer used by the index and the readers.

The analyzer contract is deliberately simple: lowercase, split on any
non-alphanumeric character, keep digit-only tokens.  No stopwords are removed
at index time; the small function-word list below is only used where a
"content token" notion is needed (lexical reader, intent fallback).
"""

from __future__ import annotations

import re

# One alphanumeric run per token; underscores and punctuation split.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Function words ignored when counting question content tokens.  Not used by
# the index analyzer.
CONTENT_STOPWORDS = frozenset(
    """
    a an the is are am was were be been being do does did has have had
    what which when where who whom whose why how
    i you he she it we they me him her us them my your his its our their
    of to in on at by for with from as into onto over under and or not no
    this that these those there here if then than so such
    can could shall should will would may might must
    """.split()
)


def token_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokens of ``text`` with their (start, end) character offsets."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def analyze(text: str) -> list[str]:
    """Index-time analyzer: lowercased alphanumeric tokens, in order."""
    return [m.group(0) for m in _TOKEN_RE.finditer(text.lower())]


def content_tokens(text: str) -> list[str]:
    """Analyzer tokens with function words removed (duplicates kept)."""
    return [t for t in analyze(text) if t not in CONTENT_STOPWORDS]
