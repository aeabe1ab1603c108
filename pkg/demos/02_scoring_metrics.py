"""The six tuple metrics and why multiset matching matters.

Shows the projection behind each metric, micro-aggregation over a corpus, and
how duplicated predictions are punished as false positives rather than
inflating recall.

Run:  python demos/02_scoring_metrics.py
"""

from speechee import EventRecord, MetricKind, project, score_corpus

gold = {
    "utt1": [
        EventRecord(
            "Transport",
            "returned",
            (("Destination", "Los Angeles"), ("Origin", "Mexico")),
        ),
        EventRecord("Arrest-Jail", "capture", ()),
    ],
    "utt2": [EventRecord("Elect", "elections", (("Person", "Erdogan"),))],
}

# A plausible model output: one event right, one trigger found but mistyped,
# one event missed entirely.
pred = {
    "utt1": [
        EventRecord("Transport", "returned", (("Destination", "Los Angeles"),)),
        EventRecord("Meet", "capture", ()),
    ],
    "utt2": [],
}

# Each metric is a projection of the records onto items; matching is exact
# string equality after normalization.
for kind in MetricKind:
    print(f"{kind.value:>14} gold items:", dict(project(gold["utt1"], kind)))

report = score_corpus(pred, gold)
print("\nper-metric scores (micro-aggregated over both utterances):")
for kind in MetricKind:
    m = report[kind]
    print(
        f"  {kind.value:>14}: tp={m.tp} fp={m.fp} fn={m.fn}  "
        f"P={m.precision:.3f} R={m.recall:.3f} F1={m.f1:.3f}"
    )

# Multiset semantics: predicting the same trigger three times buys nothing.
spam = {"utt1": pred["utt1"] * 3, "utt2": []}
spam_report = score_corpus(spam, gold)
m = spam_report[MetricKind.TRIG_I]
print(
    f"\ntriplicated predictions: tp={m.tp} fp={m.fp} "
    f"-> precision drops to {m.precision:.3f} (recall unchanged at {m.recall:.3f})"
)
