"""Synthetic grammar corpus for desk-scale training and the test suite.

Eight event types, a closed vocabulary under fifty surface words, and
templated sentences whose triggers and arguments are literal transcript
spans.  Small enough to train the toy model on a CPU in minutes, rich enough
to exercise multi-event instances and every argument role path.
"""

from __future__ import annotations

import numpy as np

from .schema import EventRecord, Instance, Schema

PEOPLE = ("anna", "ben", "carl", "dora", "emma")
PLACES = ("london", "paris", "tokyo", "rome", "cairo")
FILLERS = ("yesterday", "today")

# template, event type, trigger word, [(role, slot)]
TEMPLATES = (
    ("{a} moved to {p}", "transport", "moved", (("person", "a"), ("destination", "p"))),
    ("{b} arrested {a}", "arrest", "arrested", (("agent", "b"), ("person", "a"))),
    ("{a} was elected in {p}", "elect", "elected", (("person", "a"), ("place", "p"))),
    ("{a} married {b}", "marry", "married", (("person", "a"), ("partner", "b"))),
    ("{a} resigned", "resign", "resigned", (("person", "a"),)),
    ("{a} attacked {b}", "attack", "attacked", (("agent", "a"), ("target", "b"))),
    ("{a} met {b}", "meet", "met", (("person", "a"), ("partner", "b"))),
    ("{a} was born in {p}", "born", "born", (("person", "a"), ("place", "p"))),
)


def make_toy_schema() -> Schema:
    roles = {etype: tuple(role for role, _ in slots) for _, etype, _, slots in TEMPLATES}
    return Schema(event_types=frozenset(roles), roles_by_type=roles)


def _sample_sentence(rng: np.random.Generator) -> tuple[str, EventRecord]:
    template, etype, trigger, slots = TEMPLATES[rng.integers(len(TEMPLATES))]
    a, b = rng.choice(len(PEOPLE), size=2, replace=False)
    values = {"a": PEOPLE[a], "b": PEOPLE[b], "p": PLACES[rng.integers(len(PLACES))]}
    text = template.format(**values)
    args = tuple((role, values[slot]) for role, slot in slots)
    return text, EventRecord(etype, trigger, args)


def generate_toy_corpus(
    n_train: int = 2000,
    n_dev: int = 200,
    n_test: int = 300,
    seed: int = 0,
    two_event_prob: float = 0.2,
    filler_prob: float = 0.3,
) -> tuple[list[Instance], Schema]:
    """Seeded corpus of templated sentences with gold event records."""
    rng = np.random.default_rng(seed)
    instances = []
    for split, n in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        for i in range(n):
            text, record = _sample_sentence(rng)
            events = [record]
            if rng.random() < two_event_prob:
                text2, record2 = _sample_sentence(rng)
                text = f"{text} and {text2}"
                events.append(record2)
            if rng.random() < filler_prob:
                text = f"{text} {FILLERS[rng.integers(len(FILLERS))]}"
            instances.append(
                Instance(
                    id=f"toy-{split}-{i:05d}",
                    transcript=text,
                    events=tuple(events),
                    split=split,
                )
            )
    return instances, make_toy_schema()
