"""Target sequence construction and the inverse split of generated output.

With the clue enabled, the decoder's training target is the transcript, the
clue separator, the serialized event structure, then the end token; the
generated transcript prefix conditions the event tokens that follow it.
Without the clue the target is the event structure alone.
"""

from __future__ import annotations

from typing import Sequence

from ..codec import FLAT_FORMAT, LinearizedSequence, serialize
from ..schema import EventRecord, normalize_records, normalize_text
from ..vocab import Vocabulary
from .network import TargetSequence


def build_target(
    transcript: str,
    records: Sequence[EventRecord],
    fmt: str,
    with_clue: bool,
    vocab: Vocabulary,
) -> TargetSequence:
    """Tokenize (transcript ++ sep)? ++ serialized events ++ eos.

    Records are text-normalized first so targets match the lower-cased
    vocabulary; metrics normalize both sides the same way.
    """
    event_text = serialize(normalize_records(records), fmt).text
    event_ids = vocab.encode(event_text)
    if with_clue:
        transcript_ids = vocab.encode(normalize_text(transcript))
        tokens = transcript_ids + [vocab.sep_id] + event_ids + [vocab.eos_id]
        boundary = len(transcript_ids) + 1
    else:
        tokens = event_ids + [vocab.eos_id]
        boundary = None
    return TargetSequence(tokens=tuple(tokens), clue_boundary=boundary)


def split_output(
    seq: TargetSequence, vocab: Vocabulary, fmt: str = FLAT_FORMAT
) -> tuple[str, LinearizedSequence]:
    """Split a decoded sequence at the clue separator.

    Without a separator the whole output is treated as the event string and
    the transcript is empty; the parser's recover mode handles the rest.
    """
    tokens = list(seq.tokens)
    if seq.clue_boundary is None:
        transcript_ids, event_ids = [], tokens
    else:
        transcript_ids = tokens[: seq.clue_boundary - 1]
        event_ids = tokens[seq.clue_boundary :]
    transcript = vocab.decode(transcript_ids)
    event_text = vocab.decode(event_ids)
    return transcript, LinearizedSequence(event_text, fmt, well_formed=None)
