"""medcorpus: paragraph-level curation pipeline for PMC-style corpora."""

__version__ = "0.1.0"
