"""Event structures and the two linearization formats.

Walks through: defining a schema, building event records, serializing them as
parenthesized trees and as flat tagged sequences, and parsing model-style
ill-formed output back into records with the recovering parser.

Run:  python demos/01_event_codecs.py
"""

from speechee import (
    EventRecord,
    Schema,
    parse_flat,
    parse_tree,
    serialize_flat,
    serialize_tree,
    validate_record,
)

# A small ACE-flavoured label inventory: event types and the roles each allows.
schema = Schema(
    event_types=frozenset({"Transport", "Arrest-Jail", "Elect"}),
    roles_by_type={
        "Transport": ("Artifact", "Destination", "Origin"),
        "Arrest-Jail": ("Person", "Agent"),
        "Elect": ("Person", "Place"),
    },
)

# "The man returned to Los Angeles from Mexico following his capture ..."
# carries two events: a Transport (trigger "returned") and an Arrest-Jail
# (trigger "capture").
transport = EventRecord(
    "Transport",
    "returned",
    (("Artifact", "man"), ("Destination", "Los Angeles"), ("Origin", "Mexico")),
)
arrest = EventRecord("Arrest-Jail", "capture", ())

print("validation:", validate_record(schema, transport) or "ok")

# Tree format: one parenthesized group per event, depth-first.
tree = serialize_tree([transport, arrest])
print("\ntree  :", tree.text)

# Flat format: a structural tag before each element, no nesting.
flat = serialize_flat([transport, arrest])
print("flat  :", flat.text)

# Both formats round-trip exactly.
records, diag = parse_tree(tree.text, schema, mode="strict")
assert records == [transport, arrest] and not diag.recovered
records, diag = parse_flat(flat.text, schema)
assert records == [transport, arrest] and not diag.recovered
print("\nround trips: exact, clean diagnostics")

# Generative models emit broken trees; the recovering parser repairs them and
# reports every repair.  These two strings are classic failure shapes: an
# orphan closing parenthesis, and a truncated final event.
for broken in (
    "( Sentence sentence ) )",
    "( End-Position resigned ( Person Abdullah Qal ) ) ( Elect elections ( Person Erdogan )",
):
    wide = Schema(
        event_types=frozenset({"Sentence", "End-Position", "Elect"}),
        roles_by_type={"End-Position": ("Person",), "Elect": ("Person",), "Sentence": ()},
    )
    records, diag = parse_tree(broken, wide, mode="recover")
    print(f"\nrecovered {len(records)} event(s) from: {broken!r}")
    for issue in diag.issues:
        print(f"  repair at offset {issue.position}: [{issue.kind}] {issue.note}")
