"""Sharded line-delimited persistence, joins, and deterministic manifests.

Corpora and annotations live in .jsonl shards. The corpus side of a join is
streamed; annotations are small label records, so they are indexed in memory
grouped by article and released as articles are consumed.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .annotation import Annotation, AnnotationSource, DocumentType, DomainLabel
from .errors import (
    DuplicateAnnotation,
    EmptyVariant,
    OrphanAnnotation,
    PipelineError,
)
from .jats import Article, article_to_record, record_to_article
from .tokens import DEFAULT_COUNTER, get_counter

DEFAULT_SHARD_SIZE = 100
DEFAULT_HASH = "sha256"

CORPUS_FIELDS = ("article_id", "license", "title", "paragraphs")
PARAGRAPH_FIELDS = ("paragraph_id", "text", "section_path", "token_count")
ANNOTATION_FIELDS = ("paragraph_id", "doc_type", "domain", "edu_score", "language", "explanation", "source")
PACKED_FIELDS = ("text", "article_id", "window_index", "token_count")

_MARKUP_RE = re.compile(r"</?[a-zA-Z][a-zA-Z0-9-]*(?:\s[^<>]*)?/?>")
_LANGUAGE_RE = re.compile(r"^(?:[a-z]{2}|und)$")


@dataclass
class ShardInfo:
    name: str
    digest: str
    records: int

    def to_record(self) -> dict:
        return {"name": self.name, "digest": self.digest, "records": self.records}


def _digest_bytes(data: bytes, algorithm: str = DEFAULT_HASH) -> str:
    h = hashlib.new(algorithm)
    h.update(data)
    return h.hexdigest()


def digest_file(path: Path, algorithm: str = DEFAULT_HASH) -> str:
    h = hashlib.new(algorithm)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_shards(
    lines: Iterable[str],
    out_dir: str | Path,
    prefix: str,
    shard_size: int = DEFAULT_SHARD_SIZE,
    algorithm: str = DEFAULT_HASH,
) -> list[ShardInfo]:
    """Write lines into fixed-size shards, returning per-shard digests."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shards: list[ShardInfo] = []
    buffer: list[str] = []

    def flush() -> None:
        if not buffer:
            return
        name = f"{prefix}-{len(shards):05d}.jsonl"
        data = ("\n".join(buffer) + "\n").encode("utf-8")
        (out / name).write_bytes(data)
        shards.append(ShardInfo(name, _digest_bytes(data, algorithm), len(buffer)))
        buffer.clear()

    for line in lines:
        buffer.append(line)
        if len(buffer) >= shard_size:
            flush()
    flush()
    return shards


def shard_files(path: str | Path) -> list[Path]:
    p = Path(path)
    if p.is_file():
        return [p]
    return sorted(p.glob("*.jsonl"))


def iter_jsonl(path: str | Path) -> Iterator[dict]:
    for file in shard_files(path):
        with open(file, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)


def iter_corpus(path: str | Path) -> Iterator[Article]:
    for record in iter_jsonl(path):
        yield record_to_article(record)


def iter_annotations(path: str | Path) -> Iterator[Annotation]:
    for record in iter_jsonl(path):
        yield Annotation.from_record(record)


def write_annotations(
    annotations: Iterable[Annotation],
    out_path: str | Path,
) -> int:
    """Write annotations to a single .jsonl file; returns the record count."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(out, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


# ---------------------------------------------------------------------------
# Join

@dataclass
class AnnotatedArticle:
    article: Article
    annotations: dict[str, Annotation]

    @property
    def unannotated_ids(self) -> list[str]:
        return [p.paragraph_id for p in self.article.paragraphs if p.paragraph_id not in self.annotations]

    @property
    def fully_annotated(self) -> bool:
        return not self.unannotated_ids


def _article_of(paragraph_id: str) -> str:
    return paragraph_id.rsplit(":", 1)[0]


def load_annotations_grouped(path: str | Path) -> dict[str, dict[str, Annotation]]:
    groups: dict[str, dict[str, Annotation]] = {}
    for ann in iter_annotations(path):
        group = groups.setdefault(_article_of(ann.paragraph_id), {})
        if ann.paragraph_id in group:
            raise DuplicateAnnotation(ann.paragraph_id)
        group[ann.paragraph_id] = ann
    return groups


def join(corpus_path: str | Path, annotations_path: str | Path) -> Iterator[AnnotatedArticle]:
    """Stream the corpus joined with its annotations, in article_id order.

    Raises DuplicateAnnotation while indexing and OrphanAnnotation for
    annotations that never match a corpus paragraph.
    """
    groups = load_annotations_grouped(annotations_path)
    last_id: str | None = None
    for article in iter_corpus(corpus_path):
        if last_id is not None and article.article_id <= last_id:
            raise PipelineError(f"corpus not sorted by article_id at {article.article_id}")
        last_id = article.article_id
        annotations = groups.pop(article.article_id, {})
        known = {p.paragraph_id for p in article.paragraphs}
        for pid in annotations:
            if pid not in known:
                raise OrphanAnnotation(pid)
        yield AnnotatedArticle(article, annotations)
    if groups:
        first_group = groups[min(groups)]
        raise OrphanAnnotation(min(first_group))


# ---------------------------------------------------------------------------
# Manifests

@dataclass
class ManifestEntry:
    article_id: str
    replication_count: int
    token_count: int


@dataclass
class DatasetManifest:
    variant_name: str
    entries: list[ManifestEntry]
    shards: list[ShardInfo]
    total_tokens: int
    content_hash: str
    hash_algorithm: str = DEFAULT_HASH
    token_counter: str = DEFAULT_COUNTER
    config: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "variant_name": self.variant_name,
            "hash_algorithm": self.hash_algorithm,
            "token_counter": self.token_counter,
            "total_tokens": self.total_tokens,
            "content_hash": self.content_hash,
            "config": self.config,
            "entries": [
                {
                    "article_id": e.article_id,
                    "replication_count": e.replication_count,
                    "token_count": e.token_count,
                }
                for e in self.entries
            ],
            "shards": [s.to_record() for s in self.shards],
        }


def entry_hash(entries: Iterable[ManifestEntry], algorithm: str = DEFAULT_HASH) -> str:
    lines = sorted(f"{e.article_id}\t{e.replication_count}\t{e.token_count}" for e in entries)
    return _digest_bytes("\n".join(lines).encode("utf-8"), algorithm)


def build_manifest(
    variant_name: str,
    entries: list[ManifestEntry],
    shards: list[ShardInfo],
    algorithm: str = DEFAULT_HASH,
    token_counter: str = DEFAULT_COUNTER,
    config: dict | None = None,
) -> DatasetManifest:
    if not entries:
        raise EmptyVariant(f"variant {variant_name} selected no articles")
    total = sum(e.replication_count * e.token_count for e in entries)
    return DatasetManifest(
        variant_name=variant_name,
        entries=sorted(entries, key=lambda e: e.article_id),
        shards=shards,
        total_tokens=total,
        content_hash=entry_hash(entries, algorithm),
        hash_algorithm=algorithm,
        token_counter=token_counter,
        config=config or {},
    )


def write_manifest(manifest: DatasetManifest, out_dir: str | Path, name: str = "manifest.json") -> Path:
    path = Path(out_dir) / name
    path.write_text(json.dumps(manifest.to_record(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Validation

def _check_fields(record: dict, expected: tuple[str, ...], where: str, problems: list[str]) -> bool:
    if set(record) != set(expected):
        missing = set(expected) - set(record)
        extra = set(record) - set(expected)
        problems.append(f"{where}: wrong field set (missing {sorted(missing)}, extra {sorted(extra)})")
        return False
    return True


def detect_kind(path: str | Path) -> str:
    p = Path(path)
    if p.is_dir() and (p / "manifest.json").exists():
        return "variant"
    if p.is_dir() and (p / "pack_manifest.json").exists():
        return "packed"
    for record in iter_jsonl(p):
        keys = set(record)
        if keys == set(CORPUS_FIELDS):
            return "corpus"
        if keys == set(ANNOTATION_FIELDS):
            return "annotations"
        if keys == set(PACKED_FIELDS):
            return "packed"
        break
    return "corpus"


def validate_shards(
    path: str | Path,
    kind: str = "auto",
    min_tokens: int = 0,
    counter: str = DEFAULT_COUNTER,
    max_problems: int = 50,
) -> list[str]:
    """Check schema conformance and invariants; returns human-readable problems."""
    if kind == "auto":
        kind = detect_kind(path)
    if kind in ("corpus", "variant"):
        problems = _validate_corpus(path, kind, min_tokens, counter)
    elif kind == "annotations":
        problems = _validate_annotations(path)
    elif kind == "packed":
        problems = _validate_packed(path, counter)
    else:
        problems = [f"unknown shard kind: {kind}"]
    return problems[:max_problems]


def _validate_corpus(path: str | Path, kind: str, min_tokens: int, counter: str) -> list[str]:
    problems: list[str] = []
    count = get_counter(counter)
    seen_counts: dict[str, int] = {}
    token_totals: dict[str, int] = {}
    prev_id: str | None = None
    for record in iter_jsonl(path):
        if not _check_fields(record, CORPUS_FIELDS, "article record", problems):
            continue
        aid = record["article_id"]
        if not aid:
            problems.append("article with empty article_id")
            continue
        if aid in seen_counts and prev_id != aid:
            problems.append(f"{aid}: non-adjacent repeat")
        if kind == "corpus" and aid in seen_counts:
            problems.append(f"{aid}: duplicate article_id in corpus")
        if prev_id is not None and aid < prev_id:
            problems.append(f"{aid}: articles not sorted (follows {prev_id})")
        seen_counts[aid] = seen_counts.get(aid, 0) + 1
        prev_id = aid
        pids = set()
        total = 0
        for p in record["paragraphs"]:
            if not _check_fields(p, PARAGRAPH_FIELDS, f"{aid} paragraph", problems):
                continue
            pid = p["paragraph_id"]
            if not pid.startswith(aid + ":"):
                problems.append(f"{pid}: id does not extend article_id {aid}")
            if pid in pids:
                problems.append(f"{pid}: duplicate paragraph_id")
            pids.add(pid)
            if p["token_count"] != count(p["text"]):
                problems.append(f"{pid}: token_count {p['token_count']} != recount {count(p['text'])}")
            if min_tokens and p["token_count"] < min_tokens:
                problems.append(f"{pid}: token_count {p['token_count']} below minimum {min_tokens}")
            if _MARKUP_RE.search(p["text"]):
                problems.append(f"{pid}: text contains XML-like markup")
            total += p["token_count"]
        token_totals[aid] = total
    if kind == "variant":
        manifest_path = Path(path) / "manifest.json"
        if manifest_path.exists():
            problems.extend(_check_against_manifest(read_manifest(manifest_path), path, seen_counts, token_totals))
    return problems


def _check_against_manifest(
    manifest: dict,
    path: str | Path,
    seen_counts: dict[str, int],
    token_totals: dict[str, int],
) -> list[str]:
    problems: list[str] = []
    expected = {e["article_id"]: e for e in manifest["entries"]}
    for aid, entry in expected.items():
        if seen_counts.get(aid, 0) != entry["replication_count"]:
            problems.append(
                f"{aid}: materialized {seen_counts.get(aid, 0)} copies, manifest says {entry['replication_count']}"
            )
        if token_totals.get(aid) is not None and token_totals[aid] != entry["token_count"]:
            problems.append(f"{aid}: shard tokens {token_totals[aid]} != manifest {entry['token_count']}")
    for aid in seen_counts:
        if aid not in expected:
            problems.append(f"{aid}: in shards but not in manifest")
    recount = sum(seen_counts[aid] * token_totals[aid] for aid in seen_counts if aid in expected)
    if recount != manifest["total_tokens"]:
        problems.append(f"manifest total_tokens {manifest['total_tokens']} != recount {recount}")
    for shard in manifest["shards"]:
        file = Path(path) / shard["name"]
        if not file.exists():
            problems.append(f"{shard['name']}: listed in manifest but missing")
        elif digest_file(file, manifest["hash_algorithm"]) != shard["digest"]:
            problems.append(f"{shard['name']}: digest mismatch")
    return problems


def _validate_annotations(path: str | Path) -> list[str]:
    problems: list[str] = []
    seen: set[str] = set()
    for record in iter_jsonl(path):
        if not _check_fields(record, ANNOTATION_FIELDS, "annotation record", problems):
            continue
        pid = record["paragraph_id"]
        if pid in seen:
            problems.append(f"{pid}: duplicate annotation")
        seen.add(pid)
        try:
            DocumentType(record["doc_type"])
        except ValueError:
            problems.append(f"{pid}: unknown doc_type {record['doc_type']!r}")
        try:
            DomainLabel(record["domain"])
        except ValueError:
            problems.append(f"{pid}: unknown domain {record['domain']!r}")
        try:
            AnnotationSource(record["source"])
        except ValueError:
            problems.append(f"{pid}: unknown source {record['source']!r}")
        score = record["edu_score"]
        if not isinstance(score, int) or not 1 <= score <= 5:
            problems.append(f"{pid}: edu_score {score!r} outside [1, 5]")
        if not isinstance(record["language"], str) or not _LANGUAGE_RE.match(record["language"]):
            problems.append(f"{pid}: language {record['language']!r} not a 2-letter code or 'und'")
        if record["explanation"] is not None and not isinstance(record["explanation"], str):
            problems.append(f"{pid}: explanation must be string or null")
    return problems


def _validate_packed(path: str | Path, counter: str) -> list[str]:
    problems: list[str] = []
    count = get_counter(counter)
    budget = None
    manifest_path = Path(path) / "pack_manifest.json" if Path(path).is_dir() else None
    if manifest_path and manifest_path.exists():
        manifest = read_manifest(manifest_path)
        budget = manifest["context_budget"]
        counter = manifest.get("token_counter", counter)
        count = get_counter(counter)
    seen: set[tuple[str, int]] = set()
    for record in iter_jsonl(path):
        if not _check_fields(record, PACKED_FIELDS, "packed record", problems):
            continue
        key = (record["article_id"], record["window_index"])
        if key in seen:
            problems.append(f"{key}: duplicate (article_id, window_index)")
        seen.add(key)
        if record["token_count"] != count(record["text"]):
            problems.append(f"{key}: token_count mismatch")
        if budget is not None and record["token_count"] > budget:
            problems.append(f"{key}: window exceeds context budget {budget}")
    return problems
