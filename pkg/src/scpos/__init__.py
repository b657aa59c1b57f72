"""Corpus construction and evaluation toolkit for joint text/word sentiment analysis.

The pipeline: polarity lexicons are matched against raw Japanese text to
produce word-level sentiment annotations, records are serialized into a
fixed text format for generative models, prompts are assembled with an
optional in-context demonstration plus a three-sentence instruction, and
model completions are parsed back and scored with exact-match accuracies.
"""

__version__ = "0.1.0"

from scpos.corpus import PWPair, SchemaId, ScposRecord

__all__ = ["PWPair", "SchemaId", "ScposRecord", "__version__"]
