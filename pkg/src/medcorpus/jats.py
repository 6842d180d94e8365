"""JATS-style article parsing and paragraph segmentation.

Parses the PMC-like subset of JATS (front/article-meta/article-id,
permissions/license, body/sec/title, body//p) into Article records, drops
non-textual elements, normalizes whitespace, and filters paragraphs below a
token threshold. Parsing is a pure function of the input bytes, so directory
ingestion can fan out across processes and still produce canonical output.
"""

from __future__ import annotations

import enum
import heapq
import json
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator
from xml.etree import ElementTree as ET

from .errors import DuplicateArticle, MalformedXml, MissingIdentifier
from .tokens import DEFAULT_COUNTER, get_counter

DEFAULT_MIN_TOKENS = 64

# Subtrees that never contribute paragraph text. Inline formulas are kept as
# their text content; display math, floats and back-matter lists are not.
_EXCLUDED_TAGS = frozenset(
    {
        "table-wrap",
        "table-wrap-group",
        "table",
        "fig",
        "fig-group",
        "disp-formula",
        "disp-formula-group",
        "ref-list",
        "ack",
        "supplementary-material",
        "graphic",
        "media",
        "caption",
        "label",
        "alternatives",
        "object-id",
    }
)

# Substring markers checked against license-type/href/text, most specific
# first: non-commercial markers must win over the plain CC-BY family.
_NON_COMMERCIAL_MARKERS = ("by-nc", "by_nc", "non-commercial", "noncommercial")
_COMMERCIAL_MARKERS = (
    "creativecommons.org/licenses/by",
    "creativecommons.org/publicdomain",
    "cc0",
    "cc-by",
    "cc by",
    "public domain",
)


class License(str, enum.Enum):
    COMMERCIAL_OK = "commercial_ok"
    NON_COMMERCIAL = "non_commercial"
    UNKNOWN = "unknown"


@dataclass
class Paragraph:
    paragraph_id: str
    text: str
    section_path: list[str]
    token_count: int


@dataclass
class Article:
    article_id: str
    license: License
    title: str
    paragraphs: list[Paragraph] = field(default_factory=list)


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _subtree_text(el: ET.Element) -> str:
    """All text under el, skipping excluded subtrees but keeping their tails."""
    parts = [el.text or ""]
    for child in el:
        if _strip_ns(child.tag) not in _EXCLUDED_TAGS:
            parts.append(_subtree_text(child))
        parts.append(child.tail or "")
    return "".join(parts)


def _find_article_id(meta: ET.Element) -> str:
    ids = {(aid.get("pub-id-type") or ""): (aid.text or "").strip() for aid in meta.iter() if _strip_ns(aid.tag) == "article-id"}
    value = ""
    for kind in ("pmc", "pmcid", "pmc-uid", "accession"):
        if ids.get(kind):
            value = ids[kind]
            break
    if not value:
        value = next((v for v in ids.values() if v), "")
    if not value:
        raise MissingIdentifier("no article accession id found")
    value = "".join(value.split())
    if value.isdigit():
        value = "PMC" + value
    return value


def classify_license(license_el: ET.Element | None) -> License:
    if license_el is None:
        return License.UNKNOWN
    href = ""
    for key, val in license_el.attrib.items():
        if key.endswith("href"):
            href = val
    blob = " ".join(
        [license_el.get("license-type", ""), href, _normalize_ws(_subtree_text(license_el))]
    ).lower()
    if any(marker in blob for marker in _NON_COMMERCIAL_MARKERS):
        return License.NON_COMMERCIAL
    if any(marker in blob for marker in _COMMERCIAL_MARKERS):
        return License.COMMERCIAL_OK
    return License.UNKNOWN


def _collect_paragraphs(el: ET.Element, path: list[str], out: list[tuple[str, list[str]]]) -> None:
    for child in el:
        tag = _strip_ns(child.tag)
        if tag in _EXCLUDED_TAGS:
            continue
        if tag == "sec":
            title_el = next((c for c in child if _strip_ns(c.tag) == "title"), None)
            title = _normalize_ws(_subtree_text(title_el)) if title_el is not None else ""
            _collect_paragraphs(child, path + [title] if title else path, out)
        elif tag == "p":
            text = _normalize_ws(_subtree_text(child))
            if text:
                out.append((text, list(path)))
        else:
            # Containers such as boxed-text or list still hold body <p>s.
            _collect_paragraphs(child, path, out)


def _paragraph_id(article_id: str, ordinal: int) -> str:
    return f"{article_id}:{ordinal:04d}"


def parse_article(xml_bytes: bytes, counter: str = DEFAULT_COUNTER) -> Article:
    """Parse one JATS-like document into an Article with transient paragraphs.

    Paragraph ids are provisional here; segment_and_filter reassigns them
    densely over the surviving paragraphs.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc

    meta = next((el for el in root.iter() if _strip_ns(el.tag) == "article-meta"), None)
    if meta is None:
        raise MissingIdentifier("no article-meta element found")
    article_id = _find_article_id(meta)

    license_el = next((el for el in meta.iter() if _strip_ns(el.tag) == "license"), None)
    title_el = next((el for el in meta.iter() if _strip_ns(el.tag) == "article-title"), None)
    title = _normalize_ws(_subtree_text(title_el)) if title_el is not None else ""

    raw: list[tuple[str, list[str]]] = []
    body = next((el for el in root if _strip_ns(el.tag) == "body"), None)
    if body is not None:
        _collect_paragraphs(body, [], raw)

    count = get_counter(counter)
    paragraphs = [
        Paragraph(_paragraph_id(article_id, i), text, path, count(text))
        for i, (text, path) in enumerate(raw)
    ]
    return Article(article_id, classify_license(license_el), title, paragraphs)


def segment_and_filter(article: Article, min_tokens: int = DEFAULT_MIN_TOKENS) -> Article:
    """Drop paragraphs below min_tokens and reassign dense paragraph ids."""
    survivors = [
        replace(p, paragraph_id=_paragraph_id(article.article_id, i))
        for i, p in enumerate(p for p in article.paragraphs if p.token_count >= min_tokens)
    ]
    return replace(article, paragraphs=survivors)


def article_to_record(article: Article) -> dict:
    return {
        "article_id": article.article_id,
        "license": article.license.value,
        "title": article.title,
        "paragraphs": [
            {
                "paragraph_id": p.paragraph_id,
                "text": p.text,
                "section_path": p.section_path,
                "token_count": p.token_count,
            }
            for p in article.paragraphs
        ],
    }


def record_to_article(record: dict) -> Article:
    return Article(
        article_id=record["article_id"],
        license=License(record["license"]),
        title=record["title"],
        paragraphs=[
            Paragraph(p["paragraph_id"], p["text"], list(p["section_path"]), p["token_count"])
            for p in record["paragraphs"]
        ],
    )


def _ingest_one(path: Path, min_tokens: int, counter: str) -> tuple[str, str] | None:
    article = segment_and_filter(parse_article(path.read_bytes(), counter), min_tokens)
    if not article.paragraphs:
        return None
    return article.article_id, json.dumps(article_to_record(article), ensure_ascii=False)


def _ingest_batch(paths: list[Path], min_tokens: int, counter: str) -> list[tuple[str, str]]:
    out = []
    for path in paths:
        item = _ingest_one(path, min_tokens, counter)
        if item is not None:
            out.append(item)
    return out


def _ingest_batch_spill(paths: list[Path], min_tokens: int, counter: str, spill_path: str) -> str:
    """Worker: parse a batch and spill it sorted; only the path crosses back.

    JSON escapes control characters, so tab is a safe field separator here.
    """
    rows = sorted(_ingest_batch(paths, min_tokens, counter))
    with open(spill_path, "w", encoding="utf-8") as fh:
        for article_id, line in rows:
            fh.write(f"{article_id}\t{line}\n")
    return spill_path


def _iter_spill(path: str) -> Iterator[tuple[str, str]]:
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            article_id, line = raw.rstrip("\n").split("\t", 1)
            yield article_id, line


def _checked_unique(stream: Iterator[tuple[str, str]]) -> Iterator[tuple[str, str]]:
    last: str | None = None
    for article_id, line in stream:
        if article_id == last:
            raise DuplicateArticle(f"article_id {article_id} appears more than once")
        last = article_id
        yield article_id, line


def ingest_directory(
    input_dir: str | Path,
    min_tokens: int = DEFAULT_MIN_TOKENS,
    counter: str = DEFAULT_COUNTER,
    jobs: int = 1,
) -> Iterator[tuple[str, str]]:
    """Stream (article_id, json_line) pairs for every .xml under input_dir.

    Pairs arrive sorted by article_id, so serial and parallel runs are
    byte-identical. Parallel runs fan parsing out to worker processes that
    spill sorted batches to disk; the parent k-way merges the spills, which
    keeps the pipeline memory-bounded and off the pickle path. Articles left
    with no paragraphs are dropped.
    """
    files = sorted(Path(input_dir).rglob("*.xml"))
    if jobs <= 1 or len(files) < 2:
        yield from _checked_unique(iter(sorted(_ingest_batch(files, min_tokens, counter))))
        return
    n_batches = min(jobs * 2, len(files))
    batches = [files[i::n_batches] for i in range(n_batches)]
    with tempfile.TemporaryDirectory(prefix="medcorpus-ingest-") as tmp:
        spill_paths = [str(Path(tmp) / f"spill-{i:04d}.tsv") for i in range(n_batches)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            spills = list(
                pool.map(
                    _ingest_batch_spill,
                    batches,
                    [min_tokens] * n_batches,
                    [counter] * n_batches,
                    spill_paths,
                )
            )
        yield from _checked_unique(heapq.merge(*map(_iter_spill, spills)))
