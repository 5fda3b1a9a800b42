"""Web-crawl curation pipeline and tokenizer lab for Arabic pre-training data."""

__version__ = "0.1.0"

from .corpus_io import Decision, Document, SourceStage, StageAnnotation  # noqa: F401
from .filters import FilterConfig, FilterDecision  # noqa: F401
