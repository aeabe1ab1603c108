"""Event schema, event records, corpus instances, and text normalization.

Everything downstream (codecs, metrics, dataset building, the model) consumes
these types.  All of them are immutable value objects: safe to share across
workers without locks.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

# Structural tokens of the flat event format.  Kept here (not in codec) so that
# schema validation can reject label names that would collide with them.
TYPE_TOKEN = "<type>"
TRIGGER_TOKEN = "<trigger>"
ROLE_TOKEN = "<role>"
ARGUMENT_TOKEN = "<argument>"
FLAT_STRUCTURAL_TOKENS = (TYPE_TOKEN, TRIGGER_TOKEN, ROLE_TOKEN, ARGUMENT_TOKEN)

# Delimiter characters of the tree format.
TREE_DELIMITERS = ("(", ")")


class SchemaError(ValueError):
    """Raised when a Schema or LabelMapping violates its own invariants."""


def _check_label(name: str, what: str) -> None:
    if not name:
        raise SchemaError(f"{what} must be non-empty")
    if any(ch.isspace() for ch in name):
        raise SchemaError(f"{what} {name!r} must be a single whitespace-free token")
    if any(d in name for d in TREE_DELIMITERS):
        raise SchemaError(f"{what} {name!r} contains a tree delimiter character")
    if any(tok in name for tok in FLAT_STRUCTURAL_TOKENS):
        raise SchemaError(f"{what} {name!r} contains a flat structural token")


@dataclass(frozen=True)
class Schema:
    """Label inventory: event types, per-type roles, and the token vocabulary.

    ``vocabulary`` lists surface tokens followed by special tokens; it may be
    empty for schemas used only for validation and parsing.
    """

    event_types: frozenset[str]
    roles_by_type: Mapping[str, tuple[str, ...]]
    vocabulary: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "event_types", frozenset(self.event_types))
        object.__setattr__(
            self,
            "roles_by_type",
            {t: tuple(rs) for t, rs in dict(self.roles_by_type).items()},
        )
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        for t in sorted(self.roles_by_type):
            if t not in self.event_types:
                raise SchemaError(f"roles declared for unknown event type {t!r}")
        for t in sorted(self.event_types):
            _check_label(t, "event type")
        for t, roles in sorted(self.roles_by_type.items()):
            for r in roles:
                _check_label(r, f"role of {t!r}")
        surface = [tok for tok in self.vocabulary if tok not in FLAT_STRUCTURAL_TOKENS]
        if len(surface) + len([t for t in self.vocabulary if t in FLAT_STRUCTURAL_TOKENS]) != len(
            self.vocabulary
        ):
            raise SchemaError("vocabulary accounting error")  # pragma: no cover
        for tok in surface:
            if tok in FLAT_STRUCTURAL_TOKENS:
                raise SchemaError(f"surface token {tok!r} collides with a special token")

    def roles_of(self, event_type: str) -> tuple[str, ...]:
        return self.roles_by_type.get(event_type, ())

    @property
    def all_roles(self) -> frozenset[str]:
        return frozenset(r for roles in self.roles_by_type.values() for r in roles)

    def to_dict(self) -> dict:
        return {
            "event_types": sorted(self.event_types),
            "roles": {t: list(rs) for t, rs in sorted(self.roles_by_type.items())},
            "vocabulary": list(self.vocabulary),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schema":
        return cls(
            event_types=frozenset(d["event_types"]),
            roles_by_type={t: tuple(rs) for t, rs in d.get("roles", {}).items()},
            vocabulary=tuple(d.get("vocabulary", ())),
        )


@dataclass(frozen=True)
class EventRecord:
    """One semantic event: type, trigger mention, and (role, argument) pairs.

    Argument order is preserved as annotated; evaluation treats arguments as a
    multiset, so order only matters for serialization targets.
    """

    event_type: str
    trigger: str
    arguments: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "arguments", tuple((str(r), str(m)) for r, m in self.arguments)
        )

    def to_dict(self) -> dict:
        return {
            "type": self.event_type,
            "trigger": self.trigger,
            "args": [[r, m] for r, m in self.arguments],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EventRecord":
        return cls(
            event_type=d["type"],
            trigger=d["trigger"],
            arguments=tuple((r, m) for r, m in d.get("args", ())),
        )


@dataclass(frozen=True, eq=False)
class Instance:
    """One dataset item: id, speech (optional), transcript, gold events, split."""

    id: str
    transcript: str
    events: tuple[EventRecord, ...] = ()
    split: str = "train"
    audio: Optional[str] = None  # relative path to a waveform file, if any
    speech: object = field(default=None, repr=False)  # FrameFeatures, when synthesized
    voice: Optional[str] = None  # voice name used by a synthesizer adapter

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.split not in ("train", "dev", "test"):
            raise SchemaError(f"unknown split {self.split!r}")

    def replace(self, **kw) -> "Instance":
        current = dict(
            id=self.id,
            transcript=self.transcript,
            events=self.events,
            split=self.split,
            audio=self.audio,
            speech=self.speech,
            voice=self.voice,
        )
        current.update(kw)
        return Instance(**current)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "transcript": self.transcript,
            "events": [e.to_dict() for e in self.events],
            "split": self.split,
        }
        if self.audio is not None:
            d["audio"] = self.audio
        if self.voice is not None:
            d["voice"] = self.voice
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Instance":
        return cls(
            id=str(d["id"]),
            transcript=d.get("transcript", ""),
            events=tuple(EventRecord.from_dict(e) for e in d.get("events", ())),
            split=d.get("split", "train"),
            audio=d.get("audio"),
            voice=d.get("voice"),
        )


@dataclass(frozen=True)
class LabelMapping:
    """Rewrites hierarchical event type names to flat general-domain words."""

    pairs: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "pairs", dict(self.pairs))
        images = list(self.pairs.values())
        if len(set(images)) != len(images):
            dupes = sorted({v for v in images if images.count(v) > 1})
            raise SchemaError(f"label mapping is not injective; duplicated images: {dupes}")
        for img in images:
            _check_label(img, "mapped label")
            if ":" in img:
                raise SchemaError(f"mapped label {img!r} must not contain a colon")

    def apply(self, event_type: str) -> str:
        return self.pairs[event_type]

    def __contains__(self, event_type: str) -> bool:
        return event_type in self.pairs


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return f"{self.kind}: {self.message}"


def validate_record(schema: Schema, record: EventRecord) -> list[Violation]:
    """Return all schema violations of ``record`` (empty list means valid).

    Diagnostic, not an exception: bad content never raises here.
    """
    violations = []
    if record.event_type not in schema.event_types:
        violations.append(Violation("unknown-type", f"event type {record.event_type!r}"))
    if not record.trigger.strip():
        violations.append(Violation("empty-trigger", "trigger span is empty"))
    allowed = set(schema.roles_of(record.event_type))
    for role, mention in record.arguments:
        if record.event_type in schema.event_types and role not in allowed:
            violations.append(
                Violation("illegal-role", f"role {role!r} not allowed for {record.event_type!r}")
            )
        if not mention.strip():
            violations.append(Violation("empty-mention", f"argument {role!r} has empty mention"))
    return violations


def normalize_text(s: str, strip_punctuation: bool = False) -> str:
    """Lowercase, collapse whitespace runs to single spaces, trim ends.

    Punctuation is retained unless ``strip_punctuation`` is set. Idempotent.
    """
    if strip_punctuation:
        s = "".join(ch for ch in s if not unicodedata.category(ch).startswith("P"))
    return " ".join(s.lower().split())


def normalize_records(records: Iterable[EventRecord]) -> tuple[EventRecord, ...]:
    """Normalize every string field of the given records via normalize_text."""
    return tuple(
        EventRecord(
            event_type=normalize_text(r.event_type),
            trigger=normalize_text(r.trigger),
            arguments=tuple((normalize_text(role), normalize_text(m)) for role, m in r.arguments),
        )
        for r in records
    )
