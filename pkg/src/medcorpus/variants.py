"""Dataset variant construction: filtering, upsampling, and prefixing.

Variants run a fixed per-article pipeline: quality filter first (if the
variant has one), then upsampling predicates over the surviving paragraphs,
then metadata prefixing. When several upsampling predicates match one
article, the replication count is the single largest factor, never a
product. Replicated copies are materialized adjacently in the output shards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

from .annotation import Annotation, DocumentType, DomainLabel
from .errors import ConfigError, UnannotatedParagraph
from .jats import Article, Paragraph, article_to_record
from .store import (
    DEFAULT_HASH,
    DEFAULT_SHARD_SIZE,
    AnnotatedArticle,
    DatasetManifest,
    ManifestEntry,
    build_manifest,
    join,
    write_manifest,
    write_shards,
)
from .tokens import DEFAULT_COUNTER, get_counter

VARIANT_NAMES = (
    "be_base",
    "be_educational",
    "be_clinical",
    "be_clinical_case",
    "be_prefix",
    "be_french",
    "be_all",
)

# Which pipeline stages each variant enables.
_VARIANT_TABLE: dict[str, dict] = {
    "be_base": {},
    "be_educational": {"filter_enabled": True},
    "be_clinical": {"upsample_clinical": True},
    "be_clinical_case": {"upsample_clinical_case": True},
    "be_prefix": {"prefix_enabled": True},
    "be_french": {"upsample_language": True},
    "be_all": {
        "filter_enabled": True,
        "upsample_clinical": True,
        "upsample_clinical_case": True,
        "upsample_language": True,
        "prefix_enabled": True,
    },
}


@dataclass
class VariantConfig:
    name: str
    edu_threshold: int = 3
    replication_factor: int = 10
    prefix_enabled: bool = False
    language_target: str = "fr"
    filter_enabled: bool = False
    upsample_clinical: bool = False
    upsample_clinical_case: bool = False
    upsample_language: bool = False
    clinical_majority_mode: str = "count"  # or "tokens"

    def __post_init__(self):
        if self.name not in VARIANT_NAMES:
            raise ConfigError(f"unknown variant {self.name!r} (known: {', '.join(VARIANT_NAMES)})")
        if not 1 <= self.edu_threshold <= 5:
            raise ConfigError(f"edu_threshold {self.edu_threshold} outside [1, 5]")
        if self.replication_factor < 1:
            raise ConfigError(f"replication_factor {self.replication_factor} must be >= 1")
        if self.clinical_majority_mode not in ("count", "tokens"):
            raise ConfigError(f"clinical_majority_mode {self.clinical_majority_mode!r} not in (count, tokens)")

    @classmethod
    def for_variant(cls, name: str, **overrides) -> "VariantConfig":
        name = name.replace("-", "_")
        if name not in _VARIANT_TABLE:
            raise ConfigError(f"unknown variant {name!r} (known: {', '.join(VARIANT_NAMES)})")
        params = dict(_VARIANT_TABLE[name])
        params.update(overrides)
        return cls(name=name, **params)


def _annotation_of(aa: AnnotatedArticle, paragraph: Paragraph) -> Annotation:
    ann = aa.annotations.get(paragraph.paragraph_id)
    if ann is None:
        raise UnannotatedParagraph(paragraph.paragraph_id)
    return ann


def filter_educational(aa: AnnotatedArticle, threshold: int) -> AnnotatedArticle | None:
    """Keep paragraphs scoring >= threshold; None when the article empties."""
    kept = [p for p in aa.article.paragraphs if _annotation_of(aa, p).edu_score >= threshold]
    if not kept:
        return None
    article = replace(aa.article, paragraphs=kept)
    annotations = {p.paragraph_id: aa.annotations[p.paragraph_id] for p in kept}
    return AnnotatedArticle(article, annotations)


def is_predominantly_clinical(aa: AnnotatedArticle, mode: str = "count") -> bool:
    """Strict majority of paragraphs (or tokens) carrying the clinical domain."""
    clinical = 0
    total = 0
    for p in aa.article.paragraphs:
        weight = p.token_count if mode == "tokens" else 1
        total += weight
        if _annotation_of(aa, p).domain is DomainLabel.CLINICAL:
            clinical += weight
    return clinical * 2 > total


def has_clinical_case(aa: AnnotatedArticle) -> bool:
    return any(_annotation_of(aa, p).doc_type is DocumentType.CLINICAL_CASE for p in aa.article.paragraphs)


def has_language(aa: AnnotatedArticle, code: str) -> bool:
    return any(_annotation_of(aa, p).language == code for p in aa.article.paragraphs)


def replication_count(aa: AnnotatedArticle, config: VariantConfig) -> int:
    """Largest single factor among the matching upsampling predicates."""
    factor = 1
    if config.upsample_clinical and is_predominantly_clinical(aa, config.clinical_majority_mode):
        factor = max(factor, config.replication_factor)
    if config.upsample_clinical_case and has_clinical_case(aa):
        factor = max(factor, config.replication_factor)
    if config.upsample_language and has_language(aa, config.language_target):
        factor = max(factor, config.replication_factor)
    return factor


def annotation_prefix(ann: Annotation) -> str:
    return f"<type={ann.doc_type.value}|domain={ann.domain.value}|edu={ann.edu_score}|lang={ann.language}>"


def prefix_paragraphs(aa: AnnotatedArticle, counter: str = DEFAULT_COUNTER) -> Article:
    """Prepend each paragraph's labels on their own first line; recount tokens."""
    count = get_counter(counter)
    prefixed = []
    for p in aa.article.paragraphs:
        text = annotation_prefix(_annotation_of(aa, p)) + "\n" + p.text
        prefixed.append(replace(p, text=text, token_count=count(text)))
    return replace(aa.article, paragraphs=prefixed)


def strip_prefix(text: str) -> str:
    """Inverse of prefixing: drop the metadata line."""
    return text.split("\n", 1)[1] if "\n" in text else text


def transform_article(aa: AnnotatedArticle, config: VariantConfig, counter: str = DEFAULT_COUNTER) -> tuple[Article, int] | None:
    """Run the variant pipeline on one article.

    Returns the materialization-ready article and its replication count, or
    None when filtering removed every paragraph.
    """
    if config.filter_enabled:
        filtered = filter_educational(aa, config.edu_threshold)
        if filtered is None:
            return None
        aa = filtered
    factor = replication_count(aa, config)
    article = prefix_paragraphs(aa, counter) if config.prefix_enabled else aa.article
    return article, factor


def build_variant(
    config: VariantConfig,
    corpus_path: str | Path,
    annotations_path: str | Path,
    output_dir: str | Path,
    shard_size: int = DEFAULT_SHARD_SIZE,
    counter: str = DEFAULT_COUNTER,
    algorithm: str = DEFAULT_HASH,
) -> DatasetManifest:
    """Materialize one variant: shards plus a deterministic manifest."""
    entries: list[ManifestEntry] = []

    def lines() -> Iterator[str]:
        for aa in join(corpus_path, annotations_path):
            result = transform_article(aa, config, counter)
            if result is None:
                continue
            article, factor = result
            tokens = sum(p.token_count for p in article.paragraphs)
            entries.append(ManifestEntry(article.article_id, factor, tokens))
            line = json.dumps(article_to_record(article), ensure_ascii=False)
            for _ in range(factor):
                yield line

    shards = write_shards(lines(), output_dir, config.name.replace("_", "-"), shard_size, algorithm)
    manifest = build_manifest(
        config.name,
        entries,
        shards,
        algorithm,
        counter,
        config={
            "edu_threshold": config.edu_threshold,
            "replication_factor": config.replication_factor,
            "language_target": config.language_target,
            "clinical_majority_mode": config.clinical_majority_mode,
            "shard_size": shard_size,
        },
    )
    write_manifest(manifest, output_dir)
    return manifest


def extract_clinical_subset(
    corpus_path: str | Path,
    annotations_path: str | Path,
    min_score: int = 1,
    require_commercial: bool = False,
) -> Iterator[tuple[Article, Paragraph, Annotation]]:
    """Yield clinical-case paragraphs passing the score and license gates.

    Paragraphs without annotations simply never match; both gates are off by
    default so the full two-million-style pool is the no-flag output.
    """
    from .jats import License

    for aa in join(corpus_path, annotations_path):
        if require_commercial and aa.article.license is not License.COMMERCIAL_OK:
            continue
        for p in aa.article.paragraphs:
            ann = aa.annotations.get(p.paragraph_id)
            if ann is None or ann.doc_type is not DocumentType.CLINICAL_CASE:
                continue
            if ann.edu_score < min_score:
                continue
            yield aa.article, p, ann


def clinical_subset_record(article: Article, paragraph: Paragraph, annotation: Annotation) -> dict:
    return {
        "article_id": article.article_id,
        "license": article.license.value,
        "paragraph": {
            "paragraph_id": paragraph.paragraph_id,
            "text": paragraph.text,
            "section_path": paragraph.section_path,
            "token_count": paragraph.token_count,
        },
        "annotation": annotation.to_record(),
    }
