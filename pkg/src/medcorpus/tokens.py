"""Token counting.

The default counter treats a token as a maximal run of non-whitespace
characters (Unicode whitespace semantics). Counters are registered by name so
a subword counter can be swapped in without touching callers; the active
counter's name is recorded in every manifest.
"""

from __future__ import annotations

from typing import Callable

TokenCounter = Callable[[str], int]

DEFAULT_COUNTER = "whitespace"


def whitespace_count(text: str) -> int:
    """Number of maximal non-whitespace runs; empty text counts 0."""
    return len(text.split())


_COUNTERS: dict[str, TokenCounter] = {
    "whitespace": whitespace_count,
}


def register_counter(name: str, counter: TokenCounter) -> None:
    _COUNTERS[name] = counter


def get_counter(name: str = DEFAULT_COUNTER) -> TokenCounter:
    try:
        return _COUNTERS[name]
    except KeyError:
        raise KeyError(f"unknown token counter: {name!r} (known: {sorted(_COUNTERS)})") from None


def count_tokens(text: str, counter: str = DEFAULT_COUNTER) -> int:
    return get_counter(counter)(text)
