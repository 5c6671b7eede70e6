"""Embedding extraction from pretrained encoders into a neutral file format.

Sentence level: one pooled vector per input. Word level: token-level
hidden states plus word spans aligning subword runs to whitespace words.
"""

__version__ = "0.1.0"

from .corpus import CorpusItem, load_corpus  # noqa: F401
from .extract import ExtractionError, ExtractionJob, run_extraction  # noqa: F401
