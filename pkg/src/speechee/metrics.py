"""Tuple-projection metrics: precision / recall / micro-F1 over six views.

Each metric projects event records onto items (strings or tuples of strings),
normalizes them, and counts exact matches between prediction and gold as
multisets.  Multiset semantics penalize duplicated predictions as false
positives, so repeating an item cannot game recall.
"""

from __future__ import annotations

import difflib
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .schema import EventRecord, normalize_text


class MetricKind(Enum):
    TRIG_I = "trig-i"  # [trigger]
    EVENT_TYPE_I = "event-type-i"  # [type]
    TRIG_C = "trig-c"  # [(type, trigger)]
    ROLE_I = "role-i"  # [role]
    ARG_I = "arg-i"  # [argument]
    ARG_C = "arg-c"  # [(type, role, argument)]


def project(records: Sequence[EventRecord], kind: MetricKind) -> Counter:
    """Project records onto a multiset of normalized items for one metric."""
    items = []
    for rec in records:
        etype = normalize_text(rec.event_type)
        trig = normalize_text(rec.trigger)
        if kind is MetricKind.TRIG_I:
            items.append(trig)
        elif kind is MetricKind.EVENT_TYPE_I:
            items.append(etype)
        elif kind is MetricKind.TRIG_C:
            items.append((etype, trig))
        else:
            for role, mention in rec.arguments:
                role_n = normalize_text(role)
                mention_n = normalize_text(mention)
                if kind is MetricKind.ROLE_I:
                    items.append(role_n)
                elif kind is MetricKind.ARG_I:
                    items.append(mention_n)
                elif kind is MetricKind.ARG_C:
                    items.append((etype, role_n, mention_n))
    return Counter(items)


def match_counts(pred: Counter, gold: Counter) -> tuple[int, int, int]:
    """(tp, fp, fn) under one-to-one exact matching of multiset items."""
    tp = sum((pred & gold).values())
    fp = sum(pred.values()) - tp
    fn = sum(gold.values()) - tp
    return tp, fp, fn


def _item_text(item) -> str:
    return item if isinstance(item, str) else " ".join(item)


def match_counts_partial(
    pred: Counter, gold: Counter, overlap_threshold: float
) -> tuple[int, int, int]:
    """Greedy one-to-one matching crediting near-miss items.

    Two items match when their character-level similarity ratio reaches
    ``overlap_threshold``.  Not used for acceptance scoring; exposed for
    error analysis of generation outputs.
    """
    pred_items = sorted(pred.elements(), key=_item_text)
    gold_items = sorted(gold.elements(), key=_item_text)
    used = [False] * len(gold_items)
    tp = 0
    for p in pred_items:
        best, best_ratio = None, overlap_threshold
        for gi, g in enumerate(gold_items):
            if used[gi]:
                continue
            ratio = difflib.SequenceMatcher(None, _item_text(p), _item_text(g)).ratio()
            if ratio >= best_ratio:
                best, best_ratio = gi, ratio
        if best is not None:
            used[best] = True
            tp += 1
    return tp, len(pred_items) - tp, len(gold_items) - tp


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass(frozen=True)
class MetricCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return prf(self.tp, self.fp, self.fn)[2]

    def to_dict(self) -> dict:
        p, r, f1 = prf(self.tp, self.fp, self.fn)
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "p": p, "r": r, "f1": f1}


@dataclass(frozen=True)
class MetricReport:
    by_kind: Mapping[MetricKind, MetricCounts]
    corpus_size: int

    def __getitem__(self, kind: MetricKind) -> MetricCounts:
        return self.by_kind[kind]

    def f1(self, kind: MetricKind) -> float:
        return self.by_kind[kind].f1

    def to_dict(self) -> dict:
        return {
            "corpus_size": self.corpus_size,
            "metrics": {kind.value: c.to_dict() for kind, c in sorted(
                self.by_kind.items(), key=lambda kv: kv[0].value
            )},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricReport":
        by_kind = {
            MetricKind(name): MetricCounts(m["tp"], m["fp"], m["fn"])
            for name, m in d["metrics"].items()
        }
        return cls(by_kind=by_kind, corpus_size=d["corpus_size"])


class CorpusMismatchError(ValueError):
    def __init__(self, missing: Iterable[str], extra: Iterable[str]):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(
            f"corpora not aligned; missing from prediction: {self.missing[:5]}, "
            f"extra in prediction: {self.extra[:5]}"
        )


def score_corpus(
    pred_corpus: Mapping[str, Sequence[EventRecord]],
    gold_corpus: Mapping[str, Sequence[EventRecord]],
    overlap_threshold: float | None = None,
) -> MetricReport:
    """Micro-aggregate tp/fp/fn per metric over instances aligned by id."""
    missing = set(gold_corpus) - set(pred_corpus)
    extra = set(pred_corpus) - set(gold_corpus)
    if missing or extra:
        raise CorpusMismatchError(missing, extra)
    totals = {kind: [0, 0, 0] for kind in MetricKind}
    for iid in gold_corpus:
        pred_records = pred_corpus[iid]
        gold_records = gold_corpus[iid]
        for kind in MetricKind:
            pred_items = project(pred_records, kind)
            gold_items = project(gold_records, kind)
            if overlap_threshold is None:
                tp, fp, fn = match_counts(pred_items, gold_items)
            else:
                tp, fp, fn = match_counts_partial(pred_items, gold_items, overlap_threshold)
            totals[kind][0] += tp
            totals[kind][1] += fp
            totals[kind][2] += fn
    return MetricReport(
        by_kind={kind: MetricCounts(*totals[kind]) for kind in MetricKind},
        corpus_size=len(gold_corpus),
    )
