"""Event <-> token-sequence codecs: tree format and flat format.

Tree format nests each event as a parenthesized group traversed depth-first:

    ( Transport returned ( Artifact man ) ( Destination Los Angeles ) )

Flat format prefixes every event element with a structural tag token:

    <type> Transport <trigger> returned <role> Destination <argument> Los Angeles

Parsers come in two modes.  Strict parsing accepts only balanced, grammatical
sequences with schema-known labels and raises ``ParseError`` at the first
offending character offset.  Recover parsing never fails: unclosed groups are
closed at end of input, orphan closing parentheses are dropped, argument
groups with unknown roles are skipped, and every repair is recorded in the
returned diagnostics.  Generated model output goes through recover mode.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .schema import (
    ARGUMENT_TOKEN,
    FLAT_STRUCTURAL_TOKENS,
    ROLE_TOKEN,
    TREE_DELIMITERS,
    TRIGGER_TOKEN,
    TYPE_TOKEN,
    EventRecord,
    Schema,
)

TREE_FORMAT = "tree"
FLAT_FORMAT = "flat"
FORMATS = (TREE_FORMAT, FLAT_FORMAT)


class SerializationError(ValueError):
    """A record contains content this grammar cannot express."""


class ParseError(ValueError):
    """Strict-mode parse failure; ``position`` is a character offset."""

    def __init__(self, position: int, message: str):
        super().__init__(f"offset {position}: {message}")
        self.position = position


@dataclass(frozen=True)
class LinearizedSequence:
    """A token string encoding an event structure (and/or transcript)."""

    text: str
    format: str
    well_formed: Optional[bool] = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")


@dataclass(frozen=True)
class ParseIssue:
    position: int  # character offset into the parsed string
    kind: str  # unbalanced-paren | dangling-tag | unknown-label | truncated-event
    note: str


@dataclass
class ParseDiagnostics:
    recovered: bool = False
    issues: list[ParseIssue] = field(default_factory=list)

    @classmethod
    def clean(cls) -> "ParseDiagnostics":
        return cls(recovered=False, issues=[])

    def add(self, position: int, kind: str, note: str) -> None:
        self.issues.append(ParseIssue(position, kind, note))
        self.recovered = True

    def to_dict(self) -> dict:
        return {
            "recovered": self.recovered,
            "issues": [
                {"position": i.position, "kind": i.kind, "note": i.note} for i in self.issues
            ],
        }


def _check_span(span: str, what: str, fmt: str) -> None:
    if fmt == TREE_FORMAT:
        if "(" in span or ")" in span:
            raise SerializationError(
                f"{what} {span!r} contains a parenthesis; not expressible in tree format"
            )
    else:
        for tok in span.split():
            if tok in FLAT_STRUCTURAL_TOKENS:
                raise SerializationError(
                    f"{what} {span!r} contains structural token {tok!r}; "
                    "not expressible in flat format"
                )


def serialize_tree(records: Sequence[EventRecord]) -> LinearizedSequence:
    """Depth-first linearization: type, trigger, then arguments in stored order."""
    parts = []
    for rec in records:
        _check_span(rec.trigger, "trigger", TREE_FORMAT)
        inner = [rec.event_type, rec.trigger]
        for role, mention in rec.arguments:
            _check_span(mention, "mention", TREE_FORMAT)
            inner.append(f"( {role} {mention} )")
        parts.append("( " + " ".join(inner) + " )")
    return LinearizedSequence(" ".join(parts), TREE_FORMAT, well_formed=True)


def serialize_flat(records: Sequence[EventRecord]) -> LinearizedSequence:
    """Tagged linearization; markers appear in event-element order."""
    parts = []
    for rec in records:
        _check_span(rec.trigger, "trigger", FLAT_FORMAT)
        chunk = [TYPE_TOKEN, rec.event_type, TRIGGER_TOKEN, rec.trigger]
        for role, mention in rec.arguments:
            _check_span(mention, "mention", FLAT_FORMAT)
            chunk += [ROLE_TOKEN, role, ARGUMENT_TOKEN, mention]
        parts.append(" ".join(chunk))
    return LinearizedSequence(" ".join(parts), FLAT_FORMAT, well_formed=True)


def serialize(records: Sequence[EventRecord], fmt: str) -> LinearizedSequence:
    if fmt == TREE_FORMAT:
        return serialize_tree(records)
    if fmt == FLAT_FORMAT:
        return serialize_flat(records)
    raise ValueError(f"unknown format {fmt!r}")


_TREE_TOKEN_RE = re.compile(r"[()]|[^\s()]+")
_WS_TOKEN_RE = re.compile(r"\S+")


def _tree_tokens(seq: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start()) for m in _TREE_TOKEN_RE.finditer(seq)]


def _flat_tokens(seq: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start()) for m in _WS_TOKEN_RE.finditer(seq)]


class _TreeParser:
    """Single code path for both modes: in strict mode every repair raises."""

    def __init__(self, seq: str, schema: Schema, strict: bool):
        self.tokens = _tree_tokens(seq)
        self.schema = schema
        self.strict = strict
        self.end = len(seq)
        self.diag = ParseDiagnostics.clean()

    def repair(self, pos: int, kind: str, note: str) -> None:
        if self.strict:
            raise ParseError(pos, note)
        self.diag.add(pos, kind, note)

    def parse(self) -> tuple[list[EventRecord], ParseDiagnostics]:
        records = []
        i = 0
        n = len(self.tokens)
        while i < n:
            tok, off = self.tokens[i]
            if tok == "(":
                rec, i = self._event(i)
                if rec is not None:
                    records.append(rec)
            elif tok == ")":
                self.repair(off, "unbalanced-paren", "orphan closing parenthesis dropped")
                i += 1
            else:
                j = i
                while j < n and self.tokens[j][0] not in "()":
                    j += 1
                self.repair(off, "dangling-tag", "content outside any event group dropped")
                i = j
        return records, self.diag

    def _event(self, i: int) -> tuple[Optional[EventRecord], int]:
        open_off = self.tokens[i][1]
        i += 1
        n = len(self.tokens)
        # type label
        if i >= n:
            self.repair(self.end, "truncated-event", "input ended inside an event group")
            return None, i
        tok, off = self.tokens[i]
        if tok == ")":
            self.repair(off, "truncated-event", "empty event group dropped")
            return None, i + 1
        if tok == "(":
            etype = ""
            self.repair(off, "truncated-event", "event group missing type label")
        else:
            etype = tok
            i += 1
            if etype not in self.schema.event_types:
                self.repair(off, "unknown-label", f"unknown event type {etype!r} kept")
        # trigger span: maximal content run
        trig_parts = []
        while i < n and self.tokens[i][0] not in "()":
            trig_parts.append(self.tokens[i][0])
            i += 1
        trigger = " ".join(trig_parts)
        if not trigger:
            self.repair(
                self.tokens[i][1] if i < n else self.end,
                "truncated-event",
                "event group missing trigger span",
            )
        # argument groups
        args = []
        while i < n:
            tok, off = self.tokens[i]
            if tok == "(":
                arg, i = self._argument(i, etype)
                if arg is not None:
                    args.append(arg)
            elif tok == ")":
                return EventRecord(etype, trigger, tuple(args)), i + 1
            else:
                j = i
                while j < n and self.tokens[j][0] not in "()":
                    j += 1
                self.repair(off, "dangling-tag", "stray content after arguments dropped")
                i = j
        self.repair(self.end, "truncated-event", "unclosed event group closed at end of input")
        return EventRecord(etype, trigger, tuple(args)), i

    def _argument(self, i: int, etype: str) -> tuple[Optional[tuple[str, str]], int]:
        i += 1  # consume "("
        n = len(self.tokens)
        if i >= n:
            self.repair(self.end, "truncated-event", "input ended inside an argument group")
            return None, i
        tok, off = self.tokens[i]
        if tok == ")":
            self.repair(off, "dangling-tag", "empty argument group dropped")
            return None, i + 1
        if tok == "(":
            # over-nested group: treat the argument group as closed and let the
            # event loop re-parse from here
            self.repair(off, "unbalanced-paren", "group nested deeper than the grammar allows")
            return None, i
        role = tok
        role_off = off
        i += 1
        mention_parts = []
        while i < n and self.tokens[i][0] not in "()":
            mention_parts.append(self.tokens[i][0])
            i += 1
        mention = " ".join(mention_parts)
        closed = i < n and self.tokens[i][0] == ")"
        if closed:
            i += 1
        elif i < n and self.tokens[i][0] == "(":
            self.repair(
                self.tokens[i][1], "unbalanced-paren", "group nested deeper than the grammar allows"
            )
            return None, i
        else:
            self.repair(
                self.end, "truncated-event", "unclosed argument group closed at end of input"
            )
        if not mention:
            self.repair(role_off, "dangling-tag", f"role {role!r} without mention dropped")
            return None, i
        known_roles = (
            self.schema.roles_of(etype) if etype in self.schema.event_types else self.schema.all_roles
        )
        if role not in known_roles:
            self.repair(role_off, "unknown-label", f"argument group with unknown role {role!r} skipped")
            return None, i
        return (role, mention), i


def parse_tree(
    seq: str, schema: Schema, mode: str = "strict"
) -> tuple[list[EventRecord], ParseDiagnostics]:
    """Parse a tree-format sequence back into event records.

    ``mode`` is "strict" or "recover"; see the module docstring for the
    recovery rules.
    """
    if mode not in ("strict", "recover"):
        raise ValueError(f"unknown mode {mode!r}")
    return _TreeParser(seq, schema, strict=(mode == "strict")).parse()


# Sentinel tag: the following span belongs to a dropped tag and is swallowed
# without further diagnostics (one issue per repair, not per stray token).
_DROPPED = "_dropped"


def parse_flat(seq: str, schema: Schema) -> tuple[list[EventRecord], ParseDiagnostics]:
    """Parse a flat-format sequence; always recovers (the grammar is regular).

    A ``<type>`` token opens a new record; content between structural tokens
    belongs to the preceding tag.  Dangling tags are dropped with diagnostics.
    Unknown type or role labels are kept as-is but flagged; metrics will score
    them as wrong.
    """
    tokens = _flat_tokens(seq)
    end = len(seq)
    diag = ParseDiagnostics.clean()
    records: list[EventRecord] = []

    cur: Optional[dict] = None  # open record: {type, type_off, trigger?, args}
    pending: Optional[str] = None  # tag waiting for its span
    pending_off = 0
    pending_role: Optional[tuple[str, int]] = None  # role span waiting for <argument>
    span: list[str] = []

    def flush_span() -> None:
        nonlocal pending, pending_role
        text = " ".join(span)
        span.clear()
        if pending is None or pending == _DROPPED:
            pending = None
            return
        tag, off = pending, pending_off
        pending = None
        if tag == TYPE_TOKEN:
            cur["type"] = text
            if not text:
                diag.add(off, "dangling-tag", "type tag without a label")
            elif text not in schema.event_types:
                diag.add(off, "unknown-label", f"unknown event type {text!r} kept")
        elif tag == TRIGGER_TOKEN:
            if not text:
                diag.add(off, "dangling-tag", "trigger tag without a span")
            cur["trigger"] = text
        elif tag == ROLE_TOKEN:
            if not text:
                diag.add(off, "dangling-tag", "role tag without a label")
            else:
                pending_role = (text, off)
        elif tag == ARGUMENT_TOKEN:
            if not text:
                diag.add(off, "dangling-tag", "argument tag without a span")
                pending_role = None
            else:
                role, role_off = pending_role
                etype = cur["type"]
                known = (
                    schema.roles_of(etype) if etype in schema.event_types else schema.all_roles
                )
                if role not in known:
                    diag.add(role_off, "unknown-label", f"unknown role {role!r} kept")
                cur["args"].append((role, text))
                pending_role = None

    def flush_record() -> None:
        nonlocal cur, pending_role
        if cur is None:
            return
        if pending_role is not None:
            diag.add(pending_role[1], "dangling-tag", "role without a following argument dropped")
            pending_role = None
        if "trigger" not in cur:
            diag.add(cur["type_off"], "dangling-tag", "record without a trigger tag")
            cur["trigger"] = ""
        records.append(EventRecord(cur["type"], cur["trigger"], tuple(cur["args"])))
        cur = None

    def drop(off: int, note: str) -> None:
        nonlocal pending
        diag.add(off, "dangling-tag", note)
        pending = _DROPPED

    for tok, off in tokens:
        if tok == TYPE_TOKEN:
            flush_span()
            flush_record()
            cur = {"type": "", "type_off": off, "args": []}
            pending, pending_off = tok, off
        elif tok in (TRIGGER_TOKEN, ROLE_TOKEN, ARGUMENT_TOKEN):
            flush_span()
            if cur is None:
                drop(off, f"{tok} before any {TYPE_TOKEN} dropped")
            elif tok == ARGUMENT_TOKEN and pending_role is None:
                drop(off, f"{tok} without a preceding {ROLE_TOKEN} dropped")
            elif tok == TRIGGER_TOKEN and "trigger" in cur:
                drop(off, "duplicate trigger tag ignored")
            else:
                if tok == ROLE_TOKEN and pending_role is not None:
                    diag.add(
                        pending_role[1],
                        "dangling-tag",
                        "role without a following argument dropped",
                    )
                    pending_role = None
                pending, pending_off = tok, off
        else:
            if pending is None:
                if cur is None:
                    drop(off, "content before any tag dropped")
                else:
                    pending = _DROPPED  # orphan span after a completed element
            if pending != _DROPPED:
                span.append(tok)
    flush_span()
    flush_record()
    return records, diag


def parse(
    seq: str, schema: Schema, fmt: str, mode: str = "recover"
) -> tuple[list[EventRecord], ParseDiagnostics]:
    if fmt == TREE_FORMAT:
        return parse_tree(seq, schema, mode)
    if fmt == FLAT_FORMAT:
        return parse_flat(seq, schema)
    raise ValueError(f"unknown format {fmt!r}")
