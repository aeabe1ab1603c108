"""Teacher-forced training loop with dev-set model selection.

Batches bucket instances by source length to limit padding; batch order is
reshuffled per epoch from the run seed, so a (config, seed) pair fully
determines the trajectory.  The best checkpoint is chosen by dev trigger
classification F1, and an optional patience cuts training short when the dev
score stops improving.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..codec import parse
from ..features import FrameFeatures
from ..metrics import MetricKind, score_corpus
from ..schema import Instance, Schema, normalize_text
from ..vocab import Vocabulary
from . import layers as L
from .network import SpeechToStructure, TargetSequence
from .optim import AdamW, OptimizerConfig
from .targets import build_target, split_output


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 3e-3
    warmup_ratio: float = 0.2
    weight_decay: float = 0.01
    schedule: str = "linear"
    max_grad_norm: Optional[float] = 1.0
    seed: int = 0
    max_gen_len: int = 64
    eval_every: int = 1
    patience: Optional[int] = None
    freeze_encoder: bool = False

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "warmup_ratio": self.warmup_ratio,
            "weight_decay": self.weight_decay,
            "schedule": self.schedule,
            "max_grad_norm": self.max_grad_norm,
            "seed": self.seed,
            "max_gen_len": self.max_gen_len,
            "eval_every": self.eval_every,
            "patience": self.patience,
            "freeze_encoder": self.freeze_encoder,
        }


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class Batch:
    source: np.ndarray  # [B, T, n_mels] features or [B, T] token ids
    source_lengths: np.ndarray
    tokens_in: np.ndarray
    tokens_out: np.ndarray
    loss_mask: np.ndarray


def _source_of(inst: Instance, vocab: Vocabulary, input_kind: str):
    if input_kind == "speech":
        if not isinstance(inst.speech, FrameFeatures):
            raise ValueError(f"instance {inst.id} has no synthesized speech features")
        return inst.speech.frames
    return np.asarray(vocab.encode(normalize_text(inst.transcript)) or [vocab.unk_id])


def collate(
    sources: Sequence[np.ndarray], targets: Sequence[TargetSequence], vocab: Vocabulary
) -> Batch:
    b = len(sources)
    src_lens = np.array([len(s) for s in sources])
    t_src = int(src_lens.max())
    speech = sources[0].ndim == 2
    if speech:
        source = np.zeros((b, t_src, sources[0].shape[1]))
        for i, s in enumerate(sources):
            source[i, : len(s)] = s
    else:
        source = np.full((b, t_src), vocab.pad_id, dtype=int)
        for i, s in enumerate(sources):
            source[i, : len(s)] = s
    tgt_lens = [len(t.tokens) for t in targets]
    l = max(tgt_lens)
    tokens_in = np.full((b, l), vocab.pad_id, dtype=int)
    tokens_out = np.full((b, l), vocab.pad_id, dtype=int)
    loss_mask = np.zeros((b, l))
    for i, t in enumerate(targets):
        toks = list(t.tokens)
        tokens_in[i, : len(toks)] = [vocab.bos_id] + toks[:-1]
        tokens_out[i, : len(toks)] = toks
        loss_mask[i, : len(toks)] = 1.0
    return Batch(source, src_lens, tokens_in, tokens_out, loss_mask)


def make_batches(
    instances: Sequence[Instance],
    vocab: Vocabulary,
    input_kind: str,
    fmt: str,
    with_clue: bool,
    batch_size: int,
) -> list[Batch]:
    """Length-bucketed batches in a deterministic order."""
    prepared = []
    for inst in instances:
        src = _source_of(inst, vocab, input_kind)
        tgt = build_target(inst.transcript, inst.events, fmt, with_clue, vocab)
        prepared.append((inst.id, src, tgt))
    prepared.sort(key=lambda x: (len(x[1]), x[0]))
    return [
        collate(
            [src for _, src, _ in prepared[i : i + batch_size]],
            [tgt for _, _, tgt in prepared[i : i + batch_size]],
            vocab,
        )
        for i in range(0, len(prepared), batch_size)
    ]


@dataclass
class TrainResult:
    model: SpeechToStructure
    history: list[dict] = field(default_factory=list)
    best_dev_f1: float = 0.0
    best_epoch: int = -1


def predict_instances(
    model: SpeechToStructure,
    vocab: Vocabulary,
    schema: Schema,
    instances: Sequence[Instance],
    fmt: str,
    max_len: int,
    batch_size: int = 64,
) -> dict[str, dict]:
    """Generate, split at the clue separator, and recover-parse per instance.

    Returns {id: {records, transcript, diagnostics, n_tokens}}.
    """
    order = sorted(range(len(instances)), key=lambda i: (_src_len(instances[i], model), i))
    out: dict[str, dict] = {}
    for start in range(0, len(order), batch_size):
        chunk = [instances[i] for i in order[start : start + batch_size]]
        sources = [_source_of(inst, vocab, model.cfg.input_kind) for inst in chunk]
        if model.cfg.input_kind == "speech":
            b = len(sources)
            t_src = max(len(s) for s in sources)
            padded = np.zeros((b, t_src, sources[0].shape[1]))
            for i, s in enumerate(sources):
                padded[i, : len(s)] = s
            f, _ = model.extract_features(padded, np.array([len(s) for s in sources]))
            red = np.array([model.reduced_length(len(s)) for s in sources])
        else:
            b = len(sources)
            t_src = max(len(s) for s in sources)
            padded = np.full((b, t_src), vocab.pad_id, dtype=int)
            for i, s in enumerate(sources):
                padded[i, : len(s)] = s
            f, _ = model.embed_source(padded)
            red = np.array([len(s) for s in sources])
        mask = L.padding_mask(red, f.shape[1])
        enc, _ = model.encode(f, mask)
        seqs = model.generate_batch(
            enc, mask, max_len, vocab.bos_id, vocab.eos_id, sep_id=vocab.sep_id
        )
        for inst, seq in zip(chunk, seqs):
            transcript, event_seq = split_output(seq, vocab, fmt)
            records, diag = parse(event_seq.text, schema, fmt, mode="recover")
            out[inst.id] = {
                "records": records,
                "transcript": transcript,
                "diagnostics": diag,
                "n_tokens": len(seq.tokens),
                "missing_separator": seq.clue_boundary is None,
            }
    return out


def _src_len(inst: Instance, model: SpeechToStructure) -> int:
    if model.cfg.input_kind == "speech" and isinstance(inst.speech, FrameFeatures):
        return inst.speech.frames.shape[0]
    return len(inst.transcript)


def dev_trig_c_f1(
    model: SpeechToStructure,
    vocab: Vocabulary,
    schema: Schema,
    instances: Sequence[Instance],
    fmt: str,
    max_len: int,
) -> float:
    preds = predict_instances(model, vocab, schema, instances, fmt, max_len)
    report = score_corpus(
        {iid: p["records"] for iid, p in preds.items()},
        {inst.id: list(inst.events) for inst in instances},
    )
    return report.f1(MetricKind.TRIG_C)


def train(
    model: SpeechToStructure,
    vocab: Vocabulary,
    schema: Schema,
    train_instances: Sequence[Instance],
    dev_instances: Sequence[Instance],
    fmt: str,
    with_clue: bool,
    cfg: TrainConfig,
) -> TrainResult:
    if not train_instances:
        raise ValueError("empty training set")
    if cfg.freeze_encoder:
        model.params.frozen_groups = frozenset({"encoder"})
    batches = make_batches(
        train_instances, vocab, model.cfg.input_kind, fmt, with_clue, cfg.batch_size
    )
    opt = AdamW(
        model.params,
        OptimizerConfig(
            lr=cfg.lr,
            warmup_ratio=cfg.warmup_ratio,
            total_steps=cfg.epochs * len(batches),
            weight_decay=cfg.weight_decay,
            schedule=cfg.schedule,
        ),
    )
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(model=model)
    best_params = model.params.copy()
    evals_since_best = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(batches))
        epoch_loss, epoch_tokens, epoch_nll = 0.0, 0.0, 0.0
        for bi in order:
            loss, grads, stats = model.loss_and_grads(batches[bi])
            if cfg.max_grad_norm is not None:
                clip_grad_norm(grads, cfg.max_grad_norm)
            opt.step(grads)
            epoch_loss += loss
            epoch_nll += stats["per_token_nll"] * stats["n_tokens"]
            epoch_tokens += stats["n_tokens"]
        row = {
            "epoch": epoch,
            "train_loss": epoch_loss / len(batches),
            "per_token_nll": epoch_nll / max(epoch_tokens, 1.0),
        }
        if dev_instances and (epoch + 1) % cfg.eval_every == 0:
            f1 = dev_trig_c_f1(model, vocab, schema, dev_instances, fmt, cfg.max_gen_len)
            row["dev_trig_c_f1"] = f1
            if f1 > result.best_dev_f1:
                result.best_dev_f1 = f1
                result.best_epoch = epoch
                best_params = model.params.copy()
                evals_since_best = 0
            else:
                evals_since_best += 1
        result.history.append(row)
        if (
            cfg.patience is not None
            and dev_instances
            and evals_since_best >= cfg.patience
        ):
            break
    if dev_instances:
        model.params = best_params
    return result
