"""Small shared helpers: stable hashing, canonical JSON, JSONL io."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator


def stable_hash_hex(*parts) -> str:
    """Platform- and session-independent hash (unlike builtin ``hash``)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


def stable_hash_int(*parts) -> int:
    return int(stable_hash_hex(*parts)[:16], 16)


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, ascii-escaped."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def write_json(path, obj, indent: int = 2) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=indent, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed object); skips blank lines."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if line:
                yield lineno, json.loads(line)
