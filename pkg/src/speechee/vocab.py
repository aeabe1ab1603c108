"""Token vocabulary and the deterministic whitespace / character tokenizers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .schema import FLAT_STRUCTURAL_TOKENS, Instance, normalize_text

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
SEP = "<sep>"  # clue separator: transcript | event structure

CONTROL_TOKENS = (PAD, BOS, EOS, UNK, SEP)
# Dropped when decoding ids back to text; UNK stays visible so misrecognized
# content shows up (and scores as wrong) instead of vanishing.
DROP_ON_DECODE = (PAD, BOS, EOS, SEP)
# Tokens the decoder may emit that carry structure rather than content.
STRUCTURE_TOKENS = FLAT_STRUCTURAL_TOKENS + ("(", ")")

# Character-mode tokenization keeps special tokens atomic; everything else is
# a single character (spaces included, so text round-trips).
_ATOMIC = CONTROL_TOKENS + FLAT_STRUCTURAL_TOKENS
_CHAR_SPLIT_RE = re.compile("|".join(re.escape(t) for t in _ATOMIC) + "|.", re.DOTALL)


def _has_cjk(text: str) -> bool:
    return any("一" <= ch <= "鿿" for ch in text)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token inventory with word- or character-level tokenization.

    Control tokens come first so their ids are stable across corpora of the
    same mode; surface tokens follow in sorted order.
    """

    tokens: tuple[str, ...]
    mode: str = "word"  # word | char

    def __post_init__(self):
        if self.mode not in ("word", "char"):
            raise ValueError(f"unknown tokenizer mode {self.mode!r}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def bos_id(self) -> int:
        return self._ids[BOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def unk_id(self) -> int:
        return self._ids[UNK]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self._ids[UNK])

    def split(self, text: str) -> list[str]:
        if self.mode == "char":
            return _CHAR_SPLIT_RE.findall(text)
        return text.split()

    def encode(self, text: str) -> list[int]:
        return [self.id_of(t) for t in self.split(text)]

    def decode(self, ids: Sequence[int]) -> str:
        """Inverse of encode, dropping pad/bos/eos/sep; keeps structure tokens."""
        toks = [
            self.tokens[i]
            for i in ids
            if 0 <= i < len(self.tokens) and self.tokens[i] not in DROP_ON_DECODE
        ]
        if self.mode != "char":
            return " ".join(toks)
        # multi-character tokens keep a space on both sides so the codecs can
        # re-tokenize them; runs are collapsed afterwards
        parts = [f" {t} " if len(t) > 1 else t for t in toks]
        return " ".join("".join(parts).split())

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "mode": self.mode}

    @classmethod
    def from_dict(cls, d) -> "Vocabulary":
        return cls(tokens=tuple(d["tokens"]), mode=d["mode"])


def build_vocabulary(
    instances: Iterable[Instance],
    mode: str = "auto",
    extra_tokens: Iterable[str] = (),
) -> Vocabulary:
    """Collect the token inventory of a corpus.

    Covers transcripts plus every string that serialized event targets can
    contain (types, roles, triggers, argument mentions) and the structural
    tokens of both codec formats.  mode="auto" picks character tokenization
    when transcripts contain CJK ideographs.
    """
    instances = list(instances)
    if mode == "auto":
        mode = "char" if any(_has_cjk(inst.transcript) for inst in instances) else "word"
    surface: set[str] = set()

    def add_text(text: str) -> None:
        text = normalize_text(text)
        if mode == "char":
            surface.update(ch for ch in text)
        else:
            surface.update(text.split())

    for inst in instances:
        add_text(inst.transcript)
        for rec in inst.events:
            add_text(rec.event_type)
            add_text(rec.trigger)
            for role, mention in rec.arguments:
                add_text(role)
                add_text(mention)
    surface.update(extra_tokens)
    surface -= set(CONTROL_TOKENS)
    surface -= set(STRUCTURE_TOKENS)
    tokens = CONTROL_TOKENS + STRUCTURE_TOKENS + tuple(sorted(surface))
    return Vocabulary(tokens=tokens, mode=mode)
