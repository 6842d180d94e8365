"""Exception hierarchy shared by all pipeline stages.

Every error the pipeline can raise deliberately derives from PipelineError,
so the CLI can map any of them to exit code 1 with a one-line diagnostic.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all deliberate pipeline failures."""


class MalformedXml(PipelineError):
    """Input bytes are not a well-formed XML document."""


class MissingIdentifier(PipelineError):
    """No article accession id found in the article metadata."""


class DuplicateArticle(PipelineError):
    """Two articles in one corpus share an article_id."""


class EmptyExtract(PipelineError):
    """Prompt requested for an empty extract."""


class EmptyText(PipelineError):
    """Language detection requested for empty text."""


class MissingField(PipelineError):
    """A required labeled line is absent from an LLM response."""

    def __init__(self, field: str):
        super().__init__(f"missing required field: {field}")
        self.field = field


class ScoreOutOfRange(PipelineError):
    """Parsed educational score falls outside [1, 5]."""

    def __init__(self, value: int):
        super().__init__(f"educational score {value} outside [1, 5]")
        self.value = value


class UnknownLabel(PipelineError):
    """A labeled line carries text not in the taxonomy synonym table."""

    def __init__(self, field: str, text: str):
        super().__init__(f"unknown {field} label: {text!r}")
        self.field = field
        self.text = text


class DuplicateAnnotation(PipelineError):
    """Two annotations claim the same paragraph_id."""

    def __init__(self, paragraph_id: str):
        super().__init__(f"duplicate annotation for paragraph {paragraph_id}")
        self.paragraph_id = paragraph_id


class OrphanAnnotation(PipelineError):
    """An annotation refers to a paragraph_id absent from the corpus."""

    def __init__(self, paragraph_id: str):
        super().__init__(f"annotation for unknown paragraph {paragraph_id}")
        self.paragraph_id = paragraph_id


class UnannotatedParagraph(PipelineError):
    """An operation requiring full annotation met an unannotated paragraph."""

    def __init__(self, paragraph_id: str):
        super().__init__(f"paragraph {paragraph_id} has no annotation")
        self.paragraph_id = paragraph_id


class EmptyVariant(PipelineError):
    """A variant build produced no manifest entries."""


class EmptyInput(PipelineError):
    """A report was requested over zero annotations."""


class ConfigError(PipelineError):
    """A configuration value violates its documented range."""
