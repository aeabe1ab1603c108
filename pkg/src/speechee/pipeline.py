"""Cascaded baseline: an ASR stage feeding a text-based extraction stage.

At desk scale the ASR stage is simulated: the oracle adapter returns the gold
transcript verbatim, and the noisy-channel adapter corrupts it with seeded
character-level edits at a controlled rate, which reproduces the error
propagation phenomenon without running a real recognizer.  A thin external
adapter shells out to a real ASR command when one is available.

The extraction stage is either a trained text-input seq2seq checkpoint or a
gold-transcript lookup table (perfect extractor on clean input).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .schema import EventRecord, Instance, Schema, normalize_text
from .util import stable_hash_int

DEFAULT_ALPHABET = "abcdefghijklmnopqrstuvwxyz "


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, O(len(a) * len(b)) dynamic programming."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def character_error_rate(hypothesis: str, reference: str) -> float:
    if not reference:
        return 0.0 if not hypothesis else 1.0
    return edit_distance(hypothesis, reference) / len(reference)


def inject_cer(transcript: str, rate: float, seed: int, alphabet: str = DEFAULT_ALPHABET) -> str:
    """Corrupt a transcript with independent per-character edits.

    Each character is hit with probability ``rate``; hits split evenly among
    substitution, deletion, and insertion, so the expected edit count is
    rate * len(transcript).  Deterministic for a given (transcript, rate, seed).
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    if rate == 0.0 or not transcript:
        return transcript
    rng = np.random.default_rng(stable_hash_int("cer", transcript, rate, seed))
    out = []
    for ch in transcript:
        if rng.random() >= rate:
            out.append(ch)
            continue
        op = rng.integers(3)
        if op == 0:  # substitute
            choices = alphabet.replace(ch, "") or alphabet
            out.append(choices[rng.integers(len(choices))])
        elif op == 1:  # delete
            pass
        else:  # insert after the original character
            out.append(ch)
            out.append(alphabet[rng.integers(len(alphabet))])
    return "".join(out)


# ------------------------------------------------------------------ ASR stage


@dataclass
class OracleAsr:
    name: str = "oracle"
    kind: str = "oracle"

    def transcribe(self, inst: Instance) -> str:
        return inst.transcript


@dataclass
class NoisyChannelAsr:
    """Simulated recognizer: gold transcript through a character noise channel."""

    cer: float
    seed: int = 0
    alphabet: str = DEFAULT_ALPHABET
    name: str = field(init=False)
    kind: str = "noisy-channel"

    def __post_init__(self):
        self.name = f"cer:{self.cer}"

    def transcribe(self, inst: Instance) -> str:
        # per-instance stream so corpus noise is independent across instances
        return inject_cer(
            inst.transcript, self.cer, stable_hash_int("asr", self.seed, inst.id), self.alphabet
        )


@dataclass
class ExternalAsr:
    """Runs ``command`` with the instance's audio path appended; stdout is the
    transcript."""

    command: str
    name: str = field(init=False)
    kind: str = "external"

    def __post_init__(self):
        self.name = f"external:{self.command.split()[0]}"

    def transcribe(self, inst: Instance) -> str:
        import shlex
        import subprocess

        if not inst.audio:
            raise ValueError(f"instance {inst.id} has no audio path")
        proc = subprocess.run(
            shlex.split(self.command) + [inst.audio],
            check=True,
            capture_output=True,
            text=True,
        )
        return proc.stdout.strip()


# ------------------------------------------------------------ extraction stage


class GoldLookupExtractor:
    """Perfect extractor keyed on the normalized gold transcript.

    On a miss it returns nothing ("empty" fallback) or the events of the
    nearest gold transcript by edit distance ("fuzzy" fallback).
    """

    name = "gold-lookup"
    kind = "gold-lookup"

    def __init__(self, gold: Sequence[Instance], fallback: str = "empty"):
        if fallback not in ("empty", "fuzzy"):
            raise ValueError(f"unknown fallback {fallback!r}")
        self.fallback = fallback
        self._table: dict[str, list[EventRecord]] = {}
        for inst in gold:
            self._table.setdefault(normalize_text(inst.transcript), list(inst.events))

    def extract(self, transcript: str) -> list[EventRecord]:
        key = normalize_text(transcript)
        hit = self._table.get(key)
        if hit is not None:
            return list(hit)
        if self.fallback == "fuzzy" and self._table:
            nearest = min(self._table, key=lambda t: (edit_distance(key, t), t))
            return list(self._table[nearest])
        return []


class ToySeq2SeqExtractor:
    """Trained text-input seq2seq checkpoint as the extraction stage."""

    kind = "toy-seq2seq"

    def __init__(self, model, vocab, schema: Schema, fmt: str, with_clue: bool, max_len: int = 64):
        if model.cfg.input_kind != "text":
            raise ValueError("pipeline text stage needs a text-input model")
        self.model = model
        self.vocab = vocab
        self.schema = schema
        self.fmt = fmt
        self.with_clue = with_clue
        self.max_len = max_len
        self.name = "toy-seq2seq"

    @classmethod
    def from_checkpoint(cls, path, schema: Schema, max_len: int = 64) -> "ToySeq2SeqExtractor":
        from .model.checkpoint import load_checkpoint

        model, vocab, fmt, with_clue = load_checkpoint(path)
        return cls(model, vocab, schema, fmt, with_clue, max_len)

    def extract(self, transcript: str) -> list[EventRecord]:
        return self.extract_batch([transcript])[0]

    def extract_batch(self, transcripts: Sequence[str]) -> list[list[EventRecord]]:
        from .model.training import predict_instances

        instances = [
            Instance(id=str(i), transcript=t or " ") for i, t in enumerate(transcripts)
        ]
        preds = predict_instances(
            self.model, self.vocab, self.schema, instances, self.fmt, self.max_len
        )
        return [preds[str(i)]["records"] for i in range(len(transcripts))]


# ------------------------------------------------------------------ cascade


@dataclass
class PipelineResult:
    predictions: dict[str, list[EventRecord]]
    transcripts: dict[str, str]
    failures: list[tuple[str, str]]


def run_pipeline(corpus: Sequence[Instance], asr, text_ee) -> PipelineResult:
    """predictions = text_ee(asr(speech)) per instance.

    Adapter failures are recorded per instance and score as empty predictions;
    intermediate transcripts are kept for audit.
    """
    transcripts: dict[str, str] = {}
    failures: list[tuple[str, str]] = []
    ok_ids: list[str] = []
    for inst in corpus:
        try:
            transcripts[inst.id] = asr.transcribe(inst)
            ok_ids.append(inst.id)
        except Exception as exc:  # noqa: BLE001 - adapter boundary
            failures.append((inst.id, f"asr: {exc}"))
            transcripts[inst.id] = ""
    predictions: dict[str, list[EventRecord]] = {inst.id: [] for inst in corpus}
    if hasattr(text_ee, "extract_batch"):
        try:
            batch_out = text_ee.extract_batch([transcripts[iid] for iid in ok_ids])
            for iid, records in zip(ok_ids, batch_out):
                predictions[iid] = records
            return PipelineResult(predictions, transcripts, failures)
        except Exception as exc:  # noqa: BLE001 - fall back to per-instance
            failures.append(("*batch*", f"text-ee batch: {exc}; retrying per instance"))
    for iid in ok_ids:
        try:
            predictions[iid] = text_ee.extract(transcripts[iid])
        except Exception as exc:  # noqa: BLE001
            failures.append((iid, f"text-ee: {exc}"))
            predictions[iid] = []
    return PipelineResult(predictions, transcripts, failures)
