"""Greedy packing of articles into fixed-budget training documents.

Paragraphs are appended in order and joined by a blank line (zero tokens
under the whitespace counter) until the next paragraph would overflow the
budget, which starts a new window. A single paragraph larger than the budget
is hard-split at token boundaries; the final piece stays open so following
paragraphs can still pack behind it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .jats import Article
from .store import DEFAULT_HASH, DEFAULT_SHARD_SIZE, ShardInfo, iter_corpus, write_shards
from .tokens import DEFAULT_COUNTER, get_counter

DEFAULT_CONTEXT_BUDGET = 8192
SEPARATOR = "\n\n"


@dataclass
class TrainingDocument:
    text: str
    article_id: str
    window_index: int
    token_count: int

    def to_record(self) -> dict:
        return {
            "text": self.text,
            "article_id": self.article_id,
            "window_index": self.window_index,
            "token_count": self.token_count,
        }


def hard_split(text: str, budget: int) -> list[str]:
    """Split an oversized paragraph into budget-sized runs of tokens."""
    words = text.split()
    return [" ".join(words[i : i + budget]) for i in range(0, len(words), budget)]


def pack_article(
    article: Article,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    counter: str = DEFAULT_COUNTER,
    first_window: int = 0,
) -> list[TrainingDocument]:
    """Pack one article greedily; window indices start at first_window."""
    count = get_counter(counter)
    windows: list[list[str]] = []
    current: list[str] = []
    current_tokens = 0

    def flush() -> None:
        nonlocal current, current_tokens
        if current:
            windows.append(current)
        current = []
        current_tokens = 0

    for p in article.paragraphs:
        if p.token_count > context_budget:
            flush()
            pieces = hard_split(p.text, context_budget)
            for piece in pieces[:-1]:
                windows.append([piece])
            current = [pieces[-1]]
            current_tokens = count(pieces[-1])
            continue
        if current and current_tokens + p.token_count > context_budget:
            flush()
        current.append(p.text)
        current_tokens += p.token_count
    flush()

    docs = []
    for offset, texts in enumerate(windows):
        text = SEPARATOR.join(texts)
        docs.append(TrainingDocument(text, article.article_id, first_window + offset, count(text)))
    return docs


def pack_corpus(
    input_path: str | Path,
    output_dir: str | Path,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    counter: str = DEFAULT_COUNTER,
    shard_size: int = DEFAULT_SHARD_SIZE,
    algorithm: str = DEFAULT_HASH,
) -> dict:
    """Pack every document in a corpus or variant directory.

    Replicated copies of an article keep distinct window indices: the
    counter continues across copies, so (article_id, window_index) stays
    unique within the run.
    """
    next_window: dict[str, int] = {}
    totals = {"documents": 0, "windows": 0, "tokens": 0}

    def lines() -> Iterator[str]:
        for article in iter_corpus(input_path):
            start = next_window.get(article.article_id, 0)
            docs = pack_article(article, context_budget, counter, first_window=start)
            next_window[article.article_id] = start + len(docs)
            totals["documents"] += 1
            for doc in docs:
                totals["windows"] += 1
                totals["tokens"] += doc.token_count
                yield json.dumps(doc.to_record(), ensure_ascii=False)

    shards = write_shards(lines(), output_dir, "packed", shard_size, algorithm)
    manifest = {
        "context_budget": context_budget,
        "token_counter": counter,
        "hash_algorithm": algorithm,
        "documents": totals["documents"],
        "windows": totals["windows"],
        "total_tokens": totals["tokens"],
        "shards": [s.to_record() for s in shards],
    }
    out = Path(output_dir) / "pack_manifest.json"
    out.write_text(json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return manifest
