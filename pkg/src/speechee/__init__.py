"""Speech event extraction toolkit.

Structured-event data model, tree/flat event codecs with recovering parsers,
tuple micro-F1 metrics, a synthetic-speech dataset builder, a toy end-to-end
speech-to-structure transformer with transcript-conditioned generation, a
cascaded ASR+text-extraction baseline with controllable noise, and an
experiment harness for the format / clue / output-length ablations.
"""

from .schema import (
    EventRecord,
    Instance,
    LabelMapping,
    Schema,
    normalize_text,
    validate_record,
)
from .codec import (
    LinearizedSequence,
    ParseDiagnostics,
    ParseError,
    SerializationError,
    parse_flat,
    parse_tree,
    serialize_flat,
    serialize_tree,
)
from .metrics import MetricKind, MetricReport, match_counts, project, score_corpus
from .features import FrameFeatures

__version__ = "0.1.0"

__all__ = [
    "EventRecord",
    "FrameFeatures",
    "Instance",
    "LabelMapping",
    "LinearizedSequence",
    "MetricKind",
    "MetricReport",
    "ParseDiagnostics",
    "ParseError",
    "Schema",
    "SerializationError",
    "match_counts",
    "normalize_text",
    "parse_flat",
    "parse_tree",
    "project",
    "score_corpus",
    "serialize_flat",
    "serialize_tree",
    "validate_record",
    "__version__",
]
