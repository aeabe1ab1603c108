"""Corpus construction: loading, filtering, label mapping, synthesis, stats.

All transformations preserve split tags and instance order; none mutates its
input.  The JSONL instance format is one object per line with keys
{id, transcript, events: [{type, trigger, args: [[role, mention], ...]}],
split} plus optional "audio" (relative waveform path) and "voice" keys.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .features import FrameFeatures
from .schema import (
    EventRecord,
    Instance,
    LabelMapping,
    Schema,
    normalize_text,
    validate_record,
)
from .synth import SynthesizerAdapter, VoiceConfig
from .util import read_json, read_jsonl, write_json, write_jsonl


class CorpusValidationError(ValueError):
    """Schema violations found while loading; carries offending line numbers."""

    def __init__(self, problems: Sequence[tuple[int, str]]):
        self.problems = list(problems)
        head = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems[:5])
        more = "" if len(self.problems) <= 5 else f" (+{len(self.problems) - 5} more)"
        super().__init__(f"corpus failed schema validation: {head}{more}")


class MissingMappingError(ValueError):
    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(set(missing))
        super().__init__(f"label mapping does not cover event types: {self.missing}")


def load_schema(path) -> Schema:
    return Schema.from_dict(read_json(path))


def save_schema(schema: Schema, path) -> None:
    write_json(path, schema.to_dict())


def load_corpus(path, schema: Optional[Schema] = None) -> list[Instance]:
    """Read a JSONL corpus; optionally validate every record against a schema."""
    instances = []
    problems: list[tuple[int, str]] = []
    for lineno, obj in read_jsonl(path):
        try:
            inst = Instance.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            problems.append((lineno, f"unparseable instance: {exc}"))
            continue
        if schema is not None:
            for rec in inst.events:
                for v in validate_record(schema, rec):
                    problems.append((lineno, str(v)))
        instances.append(inst)
    if problems:
        raise CorpusValidationError(problems)
    return instances


def save_corpus(instances: Iterable[Instance], path) -> None:
    write_jsonl(path, (inst.to_dict() for inst in instances))


def filter_empty_events(instances: Sequence[Instance]) -> list[Instance]:
    """Keep exactly the instances with at least one event."""
    return [inst for inst in instances if len(inst.events) >= 1]


def filter_unreadable(instances: Sequence[Instance]) -> list[Instance]:
    """Drop instances whose normalized transcript has no letter or ideograph."""

    def readable(text: str) -> bool:
        return any(unicodedata.category(ch).startswith("L") for ch in normalize_text(text))

    return [inst for inst in instances if readable(inst.transcript)]


def map_labels(instances: Sequence[Instance], mapping: LabelMapping) -> list[Instance]:
    """Rewrite every event type through the mapping; all other fields unchanged."""
    present = {rec.event_type for inst in instances for rec in inst.events}
    uncovered = [t for t in present if t not in mapping]
    if uncovered:
        raise MissingMappingError(uncovered)
    out = []
    for inst in instances:
        events = tuple(
            EventRecord(mapping.apply(r.event_type), r.trigger, r.arguments)
            for r in inst.events
        )
        out.append(inst.replace(events=events))
    return out


def map_schema(schema: Schema, mapping: LabelMapping) -> Schema:
    """Schema counterpart of map_labels; types not covered stay as they are."""
    new_types = {mapping.pairs.get(t, t) for t in schema.event_types}
    new_roles = {mapping.pairs.get(t, t): roles for t, roles in schema.roles_by_type.items()}
    return Schema(
        event_types=frozenset(new_types),
        roles_by_type=new_roles,
        vocabulary=schema.vocabulary,
    )


def synthesize(
    instances: Sequence[Instance],
    adapter: SynthesizerAdapter,
    voices: Sequence[VoiceConfig] = (VoiceConfig(),),
    seed: int = 0,
) -> tuple[list[Instance], list[tuple[str, str]]]:
    """Attach speech to every instance, once per voice.

    With multiple voices, each instance is duplicated with a suffixed id.
    Adapter failures are collected per instance (never fatal) and returned
    alongside the successfully synthesized instances.
    """
    out: list[Instance] = []
    failures: list[tuple[str, str]] = []
    for inst in instances:
        for voice in voices:
            new_id = inst.id if len(voices) == 1 else f"{inst.id}-{voice.name}"
            try:
                result = adapter.synth(inst.transcript, voice, seed)
            except Exception as exc:  # noqa: BLE001 - adapter boundary
                failures.append((new_id, str(exc)))
                continue
            if isinstance(result, FrameFeatures):
                out.append(inst.replace(id=new_id, speech=result, voice=voice.name))
            else:
                out.append(inst.replace(id=new_id, audio=str(result), voice=voice.name))
    return out, failures


@dataclass(frozen=True)
class CorpusStats:
    n_types: int
    avg_tokens: float
    avg_audio_seconds: Optional[float]
    split_sizes: dict

    def to_dict(self) -> dict:
        return {
            "n_types": self.n_types,
            "avg_tokens": self.avg_tokens,
            "avg_audio_seconds": self.avg_audio_seconds,
            "split_sizes": dict(self.split_sizes),
        }


def _token_count(text: str) -> int:
    text = normalize_text(text)
    if any("一" <= ch <= "鿿" for ch in text):
        return sum(1 for ch in text if not ch.isspace())
    return len(text.split())


def compute_stats(instances: Sequence[Instance]) -> CorpusStats:
    """Corpus-level statistics; audio average only when speech is present."""
    n_types = len({rec.event_type for inst in instances for rec in inst.events})
    tokens = [_token_count(inst.transcript) for inst in instances]
    avg_tokens = float(np.mean(tokens)) if tokens else 0.0
    durations = [
        inst.speech.duration for inst in instances if isinstance(inst.speech, FrameFeatures)
    ]
    avg_audio = float(np.mean(durations)) if durations else None
    sizes = Counter(inst.split for inst in instances)
    return CorpusStats(
        n_types=n_types,
        avg_tokens=avg_tokens,
        avg_audio_seconds=avg_audio,
        split_sizes={s: sizes.get(s, 0) for s in ("train", "dev", "test")},
    )


def split_dev_to_test(instances: Sequence[Instance], seed: int) -> list[Instance]:
    """Reassign a seeded random half of the dev split to the test split.

    For corpora whose original test split carries no annotations.
    """
    dev_ids = [inst.id for inst in instances if inst.split == "dev"]
    rng = np.random.default_rng(seed)
    moved = set(rng.permutation(dev_ids)[: len(dev_ids) // 2].tolist())
    return [
        inst.replace(split="test") if inst.id in moved else inst for inst in instances
    ]


def top_k_types(instances: Sequence[Instance], k: int) -> list[Instance]:
    """Rebalance a long-tailed corpus to its k most frequent event types.

    Events outside the top k are removed from their instances; instances left
    with no event are dropped.
    """
    freq = Counter(rec.event_type for inst in instances for rec in inst.events)
    keep = {t for t, _ in freq.most_common(k)}
    out = []
    for inst in instances:
        events = tuple(r for r in inst.events if r.event_type in keep)
        if events:
            out.append(inst.replace(events=events))
    return out


def split_of(instances: Sequence[Instance], split: str) -> list[Instance]:
    return [inst for inst in instances if inst.split == split]


def write_dataset(instances: Sequence[Instance], out_dir, meta: Optional[dict] = None) -> None:
    """Emit train/dev/test.jsonl plus stats.json (and dataset_meta.json)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split in ("train", "dev", "test"):
        save_corpus(split_of(instances, split), out / f"{split}.jsonl")
    write_json(out / "stats.json", compute_stats(instances).to_dict())
    if meta is not None:
        write_json(out / "dataset_meta.json", meta)
