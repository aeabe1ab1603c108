"""Shared fixtures: an ACE-flavoured schema and record generators."""

from __future__ import annotations

import pytest
from hypothesis import strategies as st

from speechee.schema import EventRecord, Schema


@pytest.fixture(scope="session")
def ace_schema() -> Schema:
    roles = {
        "Transport": ("Artifact", "Destination", "Origin"),
        "Arrest-Jail": ("Person", "Agent", "Time"),
        "Elect": ("Person", "Place"),
        "End-Position": ("Person", "Entity"),
        "Sentence": ("Defendant", "Adjudicator"),
        "Meet": ("Entity", "Place"),
    }
    return Schema(event_types=frozenset(roles), roles_by_type=roles)


@pytest.fixture(scope="session")
def transport_record() -> EventRecord:
    return EventRecord(
        "Transport",
        "returned",
        (("Artifact", "man"), ("Destination", "Los Angeles"), ("Origin", "Mexico")),
    )


# --- hypothesis strategies for schema-valid records ---

_WORD = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,'-",
    min_size=1,
    max_size=8,
).filter(lambda w: w not in {"(", ")"})

# spans are single-space-joined token runs: exactly what whitespace
# tokenization can represent and round-trip
_SPAN = st.lists(_WORD, min_size=1, max_size=3).map(" ".join)


def record_strategy(schema: Schema) -> st.SearchStrategy[EventRecord]:
    types = sorted(schema.event_types)

    def build(etype: str) -> st.SearchStrategy[EventRecord]:
        roles = schema.roles_of(etype)
        args = st.lists(
            st.tuples(st.sampled_from(roles), _SPAN), min_size=0, max_size=4
        ) if roles else st.just([])
        return st.builds(
            EventRecord,
            event_type=st.just(etype),
            trigger=_SPAN,
            arguments=args.map(tuple),
        )

    return st.sampled_from(types).flatmap(build)


def record_list_strategy(schema: Schema, max_size: int = 4) -> st.SearchStrategy:
    return st.lists(record_strategy(schema), min_size=0, max_size=max_size)
