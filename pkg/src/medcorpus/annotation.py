"""Label taxonomy, prompt construction, response parsing, and sampling.

The prompt template ships as a text asset and is used verbatim; the extract
is inserted as its own block immediately before the closing instructions.
Response parsing takes the last occurrence of each labeled line so verbose
completions that quote the rubric earlier do not confuse it.
"""

from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .errors import (
    EmptyExtract,
    EmptyText,
    MissingField,
    ScoreOutOfRange,
    UnknownLabel,
)
from .jats import Article

TAXONOMY_VERSION = "v1"


class DocumentType(str, enum.Enum):
    CLINICAL_CASE = "clinical_case"
    STUDY = "study"
    REVIEW = "review"
    OTHER = "other"


class DomainLabel(str, enum.Enum):
    CLINICAL = "clinical"
    BIOMEDICAL = "biomedical"
    OTHER = "other"


class AnnotationSource(str, enum.Enum):
    LLM = "llm"
    DISTILLED = "distilled"
    FIXTURE = "fixture"


SCORE_RANGE = (1, 5)


@dataclass
class Annotation:
    paragraph_id: str
    doc_type: DocumentType
    domain: DomainLabel
    edu_score: int
    language: str
    explanation: str | None = None
    source: AnnotationSource = AnnotationSource.LLM

    def to_record(self) -> dict:
        return {
            "paragraph_id": self.paragraph_id,
            "doc_type": self.doc_type.value,
            "domain": self.domain.value,
            "edu_score": self.edu_score,
            "language": self.language,
            "explanation": self.explanation,
            "source": self.source.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Annotation":
        return cls(
            paragraph_id=record["paragraph_id"],
            doc_type=DocumentType(record["doc_type"]),
            domain=DomainLabel(record["domain"]),
            edu_score=int(record["edu_score"]),
            language=record["language"],
            explanation=record.get("explanation"),
            source=AnnotationSource(record["source"]),
        )


# ---------------------------------------------------------------------------
# Prompt construction

_EXTRACT_ANCHOR = "After examining the extract:"
_EXTRACT_HEADER = "The extract:\n"
_EXTRACT_FOOTER = "\n\n"


def load_template() -> str:
    return resources.files("medcorpus.assets").joinpath("prompt_template.txt").read_text("utf-8")


def build_prompt(extract: str) -> str:
    """Insert the extract into the annotation prompt template.

    The closing instructions stay untouched, so the prompt always ends with
    the "Document type: <classification>" line.
    """
    if not extract:
        raise EmptyExtract("cannot build a prompt for an empty extract")
    template = load_template()
    idx = template.rindex(_EXTRACT_ANCHOR)
    return template[:idx] + _EXTRACT_HEADER + extract + _EXTRACT_FOOTER + template[idx:]


# ---------------------------------------------------------------------------
# Response parsing

_DOMAIN_SYNONYMS = {
    "clinical": DomainLabel.CLINICAL,
    "biomedical": DomainLabel.BIOMEDICAL,
    "other": DomainLabel.OTHER,
}

_TYPE_SYNONYMS = {
    "clinical case": DocumentType.CLINICAL_CASE,
    "clinical_case": DocumentType.CLINICAL_CASE,
    "clinical case report": DocumentType.CLINICAL_CASE,
    "case report": DocumentType.CLINICAL_CASE,
    "study": DocumentType.STUDY,
    "research study": DocumentType.STUDY,
    "review": DocumentType.REVIEW,
    "literature review": DocumentType.REVIEW,
    "other": DocumentType.OTHER,
}

_FIELD_PATTERNS = {
    "Educational score": re.compile(r"^[ \t]*educational score[ \t]*:[ \t]*(.*?)[ \t]*$", re.I | re.M),
    "Domain": re.compile(r"^[ \t]*domain[ \t]*:[ \t]*(.*?)[ \t]*$", re.I | re.M),
    "Document type": re.compile(r"^[ \t]*document type[ \t]*:[ \t]*(.*?)[ \t]*$", re.I | re.M),
    "Explanation": re.compile(r"^[ \t]*explanation[ \t]*:[ \t]*(.*?)[ \t]*$", re.I | re.M),
}

_INT_RE = re.compile(r"-?\d+")


def _last_match(field_name: str, response: str) -> str | None:
    matches = _FIELD_PATTERNS[field_name].findall(response)
    return matches[-1] if matches else None


def _clean_label(raw: str) -> str:
    return raw.strip().strip("\"'`*.").strip().lower()


def parse_llm_response(response: str, paragraph_id: str) -> Annotation:
    """Extract an Annotation from arbitrary completion text.

    Language is not part of the prompt's output format and is therefore left
    as "und"; callers that hold the paragraph text attach detect_language.
    """
    score_raw = _last_match("Educational score", response)
    if score_raw is None:
        raise MissingField("Educational score")
    domain_raw = _last_match("Domain", response)
    if domain_raw is None:
        raise MissingField("Domain")
    type_raw = _last_match("Document type", response)
    if type_raw is None:
        raise MissingField("Document type")

    int_match = _INT_RE.search(score_raw)
    if int_match is None:
        raise UnknownLabel("Educational score", score_raw)
    score = int(int_match.group())
    if not SCORE_RANGE[0] <= score <= SCORE_RANGE[1]:
        raise ScoreOutOfRange(score)

    domain_key = _clean_label(domain_raw)
    if domain_key not in _DOMAIN_SYNONYMS:
        raise UnknownLabel("Domain", domain_raw)
    type_key = _clean_label(type_raw)
    if type_key not in _TYPE_SYNONYMS:
        raise UnknownLabel("Document type", type_raw)

    explanation = _last_match("Explanation", response)
    return Annotation(
        paragraph_id=paragraph_id,
        doc_type=_TYPE_SYNONYMS[type_key],
        domain=_DOMAIN_SYNONYMS[domain_key],
        edu_score=score,
        language="und",
        explanation=explanation or None,
        source=AnnotationSource.LLM,
    )


# ---------------------------------------------------------------------------
# Language identification

_WORD_RE = re.compile(r"[a-zà-öø-ÿœ]+")

_STOPWORD_PROFILES: dict[str, frozenset[str]] = {
    "en": frozenset(
        "the of and to in is was were are for with that this as on at by an be from or "
        "which it not but have has had their its they during after before".split()
    ),
    "fr": frozenset(
        "le la les un une des du de et est dans pour que qui au aux avec sur par ne pas "
        "ce cette ses son sa il elle nous vous plus ont été être depuis chez trois après".split()
    ),
    "es": frozenset(
        "el los las de en y es un una que con por para del se su al como más pero fue "
        "este esta han sido sobre entre años".split()
    ),
    "de": frozenset(
        "der die das und ist in den von zu mit auf für ein eine nicht als auch sich bei "
        "wurde dem des einer nach über durch".split()
    ),
}


def stopword_detect(text: str) -> str:
    """Score function-word hits per language; strict winner or "und"."""
    words = _WORD_RE.findall(text.lower())
    if not words:
        return "und"
    scores = {lang: sum(1 for w in words if w in profile) for lang, profile in _STOPWORD_PROFILES.items()}
    best = max(scores, key=lambda lang: (scores[lang], lang))
    runner_up = max(v for lang, v in scores.items() if lang != best)
    if scores[best] == 0 or scores[best] == runner_up:
        return "und"
    return best


_DETECTORS = {"stopwords": stopword_detect}

DEFAULT_DETECTOR = "stopwords"


def register_detector(name: str, detector) -> None:
    _DETECTORS[name] = detector


def detect_language(text: str, detector: str = DEFAULT_DETECTOR) -> str:
    if not text:
        raise EmptyText("cannot detect language of empty text")
    return _DETECTORS[detector](text)


# ---------------------------------------------------------------------------
# Annotation sampling

def sample_for_annotation(corpus: Iterable[Article], n: int, seed: int) -> list[str]:
    """Seed-reproducible two-stage sample of paragraph ids, returned sorted.

    Articles are drawn uniformly, then one paragraph uniformly within the
    article, so long articles cannot dominate the sample.
    """
    if n < 0:
        raise ValueError("sample size must be non-negative")
    by_article = [[p.paragraph_id for p in art.paragraphs] for art in corpus if art.paragraphs]
    total = sum(len(pids) for pids in by_article)
    if n == 0 or total == 0:
        return []
    if n >= total:
        return sorted(pid for pids in by_article for pid in pids)
    rng = random.Random(seed)
    chosen: set[str] = set()
    while len(chosen) < n:
        pids = by_article[rng.randrange(len(by_article))]
        chosen.add(pids[rng.randrange(len(pids))])
    return sorted(chosen)
