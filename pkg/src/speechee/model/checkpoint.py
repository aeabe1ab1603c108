"""Self-describing checkpoint directory: config header + named tensors."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..util import read_json, write_json
from ..vocab import Vocabulary
from .network import ModelConfig, ModelParameters, SpeechToStructure

HEADER = "config.json"
WEIGHTS = "params.npz"


def save_checkpoint(
    path,
    model: SpeechToStructure,
    vocab: Vocabulary,
    fmt: str,
    with_clue: bool,
    extra: dict | None = None,
) -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "model": model.cfg.to_dict(),
        "vocab": vocab.to_dict(),
        "format": fmt,
        "with_clue": with_clue,
        "frozen_groups": sorted(model.params.frozen_groups),
    }
    if extra:
        header["extra"] = extra
    write_json(out / HEADER, header)
    np.savez(out / WEIGHTS, **model.params.values)


def load_checkpoint(path) -> tuple[SpeechToStructure, Vocabulary, str, bool]:
    root = Path(path)
    header = read_json(root / HEADER)
    cfg = ModelConfig.from_dict(header["model"])
    with np.load(root / WEIGHTS) as npz:
        values = {k: npz[k].copy() for k in npz.files}
    params = ModelParameters(values, frozenset(header.get("frozen_groups", ())))
    model = SpeechToStructure(cfg, params)
    vocab = Vocabulary.from_dict(header["vocab"])
    return model, vocab, header["format"], header["with_clue"]
