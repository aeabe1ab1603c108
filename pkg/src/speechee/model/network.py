"""Toy speech-to-structure encoder-decoder with hand-rolled backprop.

Front end: two width-3 GELU convolutions (the second stride 2) over 80-mel
frames, plus sinusoidal positions.  A text front end (embedding lookup)
replaces the convolutions when ``input_kind="text"`` so the same network can
serve as the text-extraction stage of the cascaded baseline.  Encoder and
decoder are pre-norm transformer blocks; with the residual branch projections
zeroed, a block is exactly the identity, which the tests exploit.

Training minimizes negative log-likelihood of target sequences under teacher
forcing; per-parameter-group freezing lets the decoder train on top of a
frozen encoder.  Generation runs greedy or beam search over an incremental
decoder state with cached keys/values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..features import N_MELS, FrameFeatures
from . import layers as L

ENCODER_GROUP = "encoder"
DECODER_GROUP = "decoder"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 256
    input_kind: str = "speech"  # speech | text
    n_mels: int = N_MELS
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.input_kind not in ("speech", "text"):
            raise ValueError(f"unknown input_kind {self.input_kind!r}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_encoder_layers": self.n_encoder_layers,
            "n_decoder_layers": self.n_decoder_layers,
            "d_ff": self.d_ff,
            "input_kind": self.input_kind,
            "n_mels": self.n_mels,
            "init_std": self.init_std,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "ModelConfig":
        return cls(**d)


def group_of(name: str) -> str:
    return ENCODER_GROUP if name.startswith("enc.") else DECODER_GROUP


@dataclass
class ModelParameters:
    """Named tensors plus the set of frozen parameter groups."""

    values: dict[str, np.ndarray]
    frozen_groups: frozenset[str] = frozenset()

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            {k: v.copy() for k, v in self.values.items()}, self.frozen_groups
        )

    def frozen(self, name: str) -> bool:
        return group_of(name) in self.frozen_groups

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.values.items()}


def init_parameters(cfg: ModelConfig) -> ModelParameters:
    rng = np.random.default_rng(cfg.seed)
    p: dict[str, np.ndarray] = {}

    def mat(name, *shape):
        p[name] = rng.normal(0.0, cfg.init_std, size=shape)

    def zeros(name, *shape):
        p[name] = np.zeros(shape)

    def ones(name, *shape):
        p[name] = np.ones(shape)

    d, ff = cfg.d_model, cfg.d_ff
    if cfg.input_kind == "speech":
        mat("enc.conv1.w", 3, cfg.n_mels, d)
        zeros("enc.conv1.b", d)
        mat("enc.conv2.w", 3, d, d)
        zeros("enc.conv2.b", d)
    else:
        mat("enc.embed.w", cfg.vocab_size, d)

    def attn_block(prefix):
        for nm in ("wq", "wk", "wv", "wo"):
            mat(f"{prefix}.{nm}", d, d)
        for nm in ("bq", "bk", "bv", "bo"):
            zeros(f"{prefix}.{nm}", d)

    def ffn_block(prefix):
        mat(f"{prefix}.w1", d, ff)
        zeros(f"{prefix}.b1", ff)
        mat(f"{prefix}.w2", ff, d)
        zeros(f"{prefix}.b2", d)

    def ln(prefix):
        ones(f"{prefix}.g", d)
        zeros(f"{prefix}.b", d)

    for i in range(cfg.n_encoder_layers):
        ln(f"enc.l{i}.ln1")
        attn_block(f"enc.l{i}.attn")
        ln(f"enc.l{i}.ln2")
        ffn_block(f"enc.l{i}.ffn")
    mat("dec.embed.w", cfg.vocab_size, d)
    for i in range(cfg.n_decoder_layers):
        ln(f"dec.l{i}.ln1")
        attn_block(f"dec.l{i}.self")
        ln(f"dec.l{i}.ln2")
        attn_block(f"dec.l{i}.cross")
        ln(f"dec.l{i}.ln3")
        ffn_block(f"dec.l{i}.ffn")
    mat("dec.out.w", d, cfg.vocab_size)
    zeros("dec.out.b", cfg.vocab_size)
    return ModelParameters(p)


@dataclass(frozen=True)
class EncoderStates:
    """Contextualized encoder output: [reduced-time, d_model]."""

    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 2:
            raise ValueError("EncoderStates holds a single sequence")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("non-finite encoder states")


@dataclass(frozen=True)
class TargetSequence:
    """Decoder-side token ids; clue_boundary is the index of the first
    event-structure token (one past the separator), or None without a clue."""

    tokens: tuple[int, ...]
    clue_boundary: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))


@dataclass
class DecoderState:
    """Incremental decoding state; appending a step never mutates history."""

    self_k: tuple[np.ndarray, ...]  # per layer [B, H, t, dh]
    self_v: tuple[np.ndarray, ...]
    cross_k: tuple[np.ndarray, ...]  # per layer, fixed: [B, H, S, dh]
    cross_v: tuple[np.ndarray, ...]
    cross_mask: Optional[np.ndarray]
    position: int = 0


# ------------------------------------------------------------------ blocks

def _pre_ln_sublayer(x, p, ln_prefix, fn):
    normed, ln_cache = L.layernorm_fwd(x, p[f"{ln_prefix}.g"], p[f"{ln_prefix}.b"])
    out, cache = fn(normed)
    return x + out, (ln_cache, cache), normed


def _ffn_fwd(x, p, prefix):
    h1, c1 = L.linear_fwd(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"])
    a1, ca = L.gelu_fwd(h1)
    out, c2 = L.linear_fwd(a1, p[f"{prefix}.w2"], p[f"{prefix}.b2"])
    return out, (c1, ca, c2)


def _ffn_bwd(g, cache, grads, prefix):
    c1, ca, c2 = cache
    ga1, gw2, gb2 = L.linear_bwd(g, c2)
    grads[f"{prefix}.w2"] += gw2
    grads[f"{prefix}.b2"] += gb2
    gh1 = L.gelu_bwd(ga1, ca)
    gx, gw1, gb1 = L.linear_bwd(gh1, c1)
    grads[f"{prefix}.w1"] += gw1
    grads[f"{prefix}.b1"] += gb1
    return gx


class SpeechToStructure:
    """The model: configuration plus parameters, with explicit forward passes."""

    def __init__(self, cfg: ModelConfig, params: Optional[ModelParameters] = None):
        self.cfg = cfg
        self.params = params if params is not None else init_parameters(cfg)

    # ------------------------------------------------------------ front end

    def extract_features(self, feats: np.ndarray, lengths=None) -> tuple[np.ndarray, list]:
        """Conv front end: [B, T, n_mels] -> [B, ceil(T/2), d_model] + positions.

        With ``lengths``, frames past each sequence's end are zeroed between
        the conv layers, so valid outputs are independent of batch padding.
        """
        p = self.params.values
        if feats.ndim != 3 or feats.shape[-1] != self.cfg.n_mels:
            raise ValueError(
                f"expected [batch, time, {self.cfg.n_mels}] features, got {feats.shape}"
            )
        h1, c1 = L.conv1d_fwd(feats, p["enc.conv1.w"], p["enc.conv1.b"], stride=1)
        a1, ca1 = L.gelu_fwd(h1)
        frame_mask = None
        if lengths is not None:
            frame_mask = (
                np.arange(feats.shape[1])[None, :] < np.asarray(lengths)[:, None]
            )[..., None]
            a1 = a1 * frame_mask
        h2, c2 = L.conv1d_fwd(a1, p["enc.conv2.w"], p["enc.conv2.b"], stride=2)
        a2, ca2 = L.gelu_fwd(h2)
        pos = L.sinusoid_positions(a2.shape[1], self.cfg.d_model)
        out = a2 + pos[None]
        return out, [("conv", (c1, ca1, c2, ca2, frame_mask))]

    def _front_end_bwd(self, g, cache, grads):
        kind, payload = cache[0]
        if kind == "conv":
            c1, ca1, c2, ca2, frame_mask = payload
            g2 = L.gelu_bwd(g, ca2)
            ga1, gw2, gb2 = L.conv1d_bwd(g2, c2)
            grads["enc.conv2.w"] += gw2
            grads["enc.conv2.b"] += gb2
            if frame_mask is not None:
                ga1 = ga1 * frame_mask
            g1 = L.gelu_bwd(ga1, ca1)
            _, gw1, gb1 = L.conv1d_bwd(g1, c1)
            grads["enc.conv1.w"] += gw1
            grads["enc.conv1.b"] += gb1
        else:
            emb_cache = payload
            grads["enc.embed.w"] += L.embedding_bwd(g, emb_cache)

    def embed_source(self, ids: np.ndarray) -> tuple[np.ndarray, list]:
        """Text front end: [B, T] token ids -> [B, T, d_model] + positions."""
        p = self.params.values
        emb, cache = L.embedding_fwd(ids, p["enc.embed.w"])
        pos = L.sinusoid_positions(ids.shape[1], self.cfg.d_model)
        return emb + pos[None], [("embed", cache)]

    @staticmethod
    def reduced_length(length: int) -> int:
        return (int(length) + 1) // 2

    # ------------------------------------------------------------ encoder

    def encode(self, f: np.ndarray, src_mask=None, internals=None):
        """Transformer encoder over front-end output; length preserving."""
        p = self.params.values
        x = f
        caches = []
        for i in range(self.cfg.n_encoder_layers):
            pre = f"enc.l{i}"
            x, attn_cache, normed1 = _pre_ln_sublayer(
                x,
                p,
                f"{pre}.ln1",
                lambda nx: L.attention_fwd(nx, nx, p, f"{pre}.attn", self.cfg.n_heads, src_mask),
            )
            x, ffn_cache, normed2 = _pre_ln_sublayer(
                x, p, f"{pre}.ln2", lambda nx: _ffn_fwd(nx, p, f"{pre}.ffn")
            )
            caches.append((attn_cache, ffn_cache))
            if internals is not None:
                internals.setdefault("ln_outputs", []).extend([normed1, normed2])
        return x, caches

    def _encode_bwd(self, g, caches, grads):
        for i in reversed(range(self.cfg.n_encoder_layers)):
            pre = f"enc.l{i}"
            (ln1_cache, attn_cache), (ln2_cache, ffn_cache) = caches[i]
            gf = _ffn_bwd(g, ffn_cache, grads, f"{pre}.ffn")
            gn, ggamma, gbeta = L.layernorm_bwd(gf, ln2_cache)
            grads[f"{pre}.ln2.g"] += ggamma
            grads[f"{pre}.ln2.b"] += gbeta
            g = g + gn
            gq, gkv = L.attention_bwd(g, attn_cache, grads, f"{pre}.attn")
            gn, ggamma, gbeta = L.layernorm_bwd(gq + gkv, ln1_cache)
            grads[f"{pre}.ln1.g"] += ggamma
            grads[f"{pre}.ln1.b"] += gbeta
            g = g + gn
        return g

    # ------------------------------------------------------------ decoder

    def decode_teacher_forced(self, tokens_in, enc_states, cross_mask=None, self_mask=None):
        """Full-sequence decoder pass; returns logits and backward caches."""
        p = self.params.values
        emb, emb_cache = L.embedding_fwd(tokens_in, p["dec.embed.w"])
        pos = L.sinusoid_positions(tokens_in.shape[1], self.cfg.d_model)
        x = emb + pos[None]
        if self_mask is None:
            self_mask = L.causal_mask(tokens_in.shape[1])
        caches = []
        for i in range(self.cfg.n_decoder_layers):
            pre = f"dec.l{i}"
            x, self_cache, _ = _pre_ln_sublayer(
                x,
                p,
                f"{pre}.ln1",
                lambda nx: L.attention_fwd(nx, nx, p, f"{pre}.self", self.cfg.n_heads, self_mask),
            )
            x, cross_cache, _ = _pre_ln_sublayer(
                x,
                p,
                f"{pre}.ln2",
                lambda nx: L.attention_fwd(
                    nx, enc_states, p, f"{pre}.cross", self.cfg.n_heads, cross_mask
                ),
            )
            x, ffn_cache, _ = _pre_ln_sublayer(
                x, p, f"{pre}.ln3", lambda nx: _ffn_fwd(nx, p, f"{pre}.ffn")
            )
            caches.append((self_cache, cross_cache, ffn_cache))
        logits, out_cache = L.linear_fwd(x, p["dec.out.w"], p["dec.out.b"])
        return logits, (emb_cache, caches, out_cache)

    def _decode_bwd(self, g_logits, cache, grads):
        emb_cache, caches, out_cache = cache
        g, gw, gb = L.linear_bwd(g_logits, out_cache)
        grads["dec.out.w"] += gw
        grads["dec.out.b"] += gb
        g_enc_total = None
        for i in reversed(range(self.cfg.n_decoder_layers)):
            pre = f"dec.l{i}"
            (ln1_c, self_c), (ln2_c, cross_c), (ln3_c, ffn_c) = caches[i]
            gf = _ffn_bwd(g, ffn_c, grads, f"{pre}.ffn")
            gn, gg, gb_ = L.layernorm_bwd(gf, ln3_c)
            grads[f"{pre}.ln3.g"] += gg
            grads[f"{pre}.ln3.b"] += gb_
            g = g + gn
            gq, g_enc = L.attention_bwd(g, cross_c, grads, f"{pre}.cross")
            g_enc_total = g_enc if g_enc_total is None else g_enc_total + g_enc
            gn, gg, gb_ = L.layernorm_bwd(gq, ln2_c)
            grads[f"{pre}.ln2.g"] += gg
            grads[f"{pre}.ln2.b"] += gb_
            g = g + gn
            gq, gkv = L.attention_bwd(g, self_c, grads, f"{pre}.self")
            gn, gg, gb_ = L.layernorm_bwd(gq + gkv, ln1_c)
            grads[f"{pre}.ln1.g"] += gg
            grads[f"{pre}.ln1.b"] += gb_
            g = g + gn
        grads["dec.embed.w"] += L.embedding_bwd(g, emb_cache)
        return g_enc_total

    # ------------------------------------------------------------ loss

    def forward_batch(self, batch, internals=None):
        """Front end + encoder for a padded batch; returns states and caches."""
        if self.cfg.input_kind == "speech":
            f, fe_cache = self.extract_features(batch.source, batch.source_lengths)
            red = np.array([self.reduced_length(n) for n in batch.source_lengths])
        else:
            f, fe_cache = self.embed_source(batch.source)
            red = np.asarray(batch.source_lengths)
        src_mask = L.padding_mask(red, f.shape[1])
        enc, enc_caches = self.encode(f, src_mask, internals=internals)
        return enc, src_mask, (fe_cache, enc_caches)

    def loss_and_grads(self, batch, want_grads: bool = True):
        """Teacher-forced NLL: mean over the batch of per-sequence summed
        negative log-likelihood.  Returns (loss, grads, stats)."""
        enc, src_mask, (fe_cache, enc_caches) = self.forward_batch(batch)
        logits, dec_cache = self.decode_teacher_forced(
            batch.tokens_in, enc, cross_mask=src_mask
        )
        b, l, v = logits.shape
        shifted = logits - logits.max(axis=-1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=-1)) + logits.max(axis=-1)
        token_logp = np.take_along_axis(logits, batch.tokens_out[..., None], axis=-1)[..., 0] - logz
        mask = batch.loss_mask
        nll = -(token_logp * mask)
        loss = float(nll.sum() / b)
        n_tokens = float(mask.sum())
        stats = {
            "loss": loss,
            "per_token_nll": float(nll.sum() / max(n_tokens, 1.0)),
            "n_tokens": n_tokens,
        }
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite training loss {loss}; logits range "
                f"[{logits.min():.3e}, {logits.max():.3e}]"
            )
        if not want_grads:
            return loss, None, stats
        probs = np.exp(logits - logz[..., None])
        g_logits = probs * mask[..., None]
        np.add.at(
            g_logits.reshape(-1, v),
            (np.arange(b * l), batch.tokens_out.reshape(-1)),
            -mask.reshape(-1),
        )
        g_logits /= b
        grads = self.params.zero_grads()
        g_enc = self._decode_bwd(g_logits, dec_cache, grads)
        g_f = self._encode_bwd(g_enc, enc_caches, grads)
        self._front_end_bwd(g_f, fe_cache, grads)
        for name in grads:
            if self.params.frozen(name):
                grads[name][...] = 0.0
        return loss, grads, stats

    # ------------------------------------------------------------ inference

    def encode_instance(self, feats_or_ids) -> EncoderStates:
        """Single-sequence encoder pass (the injection seam for pretrained
        encoder states: anything shaped [reduced-time, d_model] works)."""
        if self.cfg.input_kind == "speech":
            feats = feats_or_ids.frames if isinstance(feats_or_ids, FrameFeatures) else feats_or_ids
            f, _ = self.extract_features(feats[None])
        else:
            f, _ = self.embed_source(np.asarray(feats_or_ids)[None])
        enc, _ = self.encode(f)
        return EncoderStates(states=enc[0])

    def init_decoder_state(self, enc_states: np.ndarray, cross_mask=None) -> DecoderState:
        """Precompute per-layer cross-attention keys/values from H."""
        p = self.params.values
        if enc_states.ndim == 2:
            enc_states = enc_states[None]
        ck, cv = [], []
        for i in range(self.cfg.n_decoder_layers):
            pre = f"dec.l{i}.cross"
            k = enc_states @ p[f"{pre}.wk"] + p[f"{pre}.bk"]
            v = enc_states @ p[f"{pre}.wv"] + p[f"{pre}.bv"]
            ck.append(L._split_heads(k, self.cfg.n_heads))
            cv.append(L._split_heads(v, self.cfg.n_heads))
        b = enc_states.shape[0]
        d = self.cfg.d_model
        dh = d // self.cfg.n_heads
        empty = np.zeros((b, self.cfg.n_heads, 0, dh))
        return DecoderState(
            self_k=tuple(empty for _ in range(self.cfg.n_decoder_layers)),
            self_v=tuple(empty for _ in range(self.cfg.n_decoder_layers)),
            cross_k=tuple(ck),
            cross_v=tuple(cv),
            cross_mask=cross_mask,
            position=0,
        )

    def decode_step(self, state: DecoderState, prev_tokens) -> tuple[np.ndarray, DecoderState]:
        """One incremental step: previous token ids [B] -> probabilities [B, V].

        Returns the next-token distribution and a new state; the input state
        is never mutated.
        """
        p = self.params.values
        prev_tokens = np.asarray(prev_tokens)
        if prev_tokens.ndim == 0:
            prev_tokens = prev_tokens[None]
        if np.any(prev_tokens < 0) or np.any(prev_tokens >= self.cfg.vocab_size):
            raise ValueError("token id outside vocabulary")
        x = p["dec.embed.w"][prev_tokens][:, None, :]
        x = x + L.sinusoid_positions(state.position + 1, self.cfg.d_model)[state.position]
        nh = self.cfg.n_heads
        new_k, new_v = [], []
        for i in range(self.cfg.n_decoder_layers):
            pre = f"dec.l{i}"
            normed, _ = L.layernorm_fwd(x, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            q = L._split_heads(normed @ p[f"{pre}.self.wq"] + p[f"{pre}.self.bq"], nh)
            k_step = L._split_heads(normed @ p[f"{pre}.self.wk"] + p[f"{pre}.self.bk"], nh)
            v_step = L._split_heads(normed @ p[f"{pre}.self.wv"] + p[f"{pre}.self.bv"], nh)
            k = np.concatenate([state.self_k[i], k_step], axis=2)
            v = np.concatenate([state.self_v[i], v_step], axis=2)
            new_k.append(k)
            new_v.append(v)
            scale = 1.0 / np.sqrt(q.shape[-1])
            probs = L.softmax(q @ np.swapaxes(k, -1, -2) * scale)
            ctx = L._merge_heads(probs @ v)
            x = x + ctx @ p[f"{pre}.self.wo"] + p[f"{pre}.self.bo"]

            normed, _ = L.layernorm_fwd(x, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            q = L._split_heads(normed @ p[f"{pre}.cross.wq"] + p[f"{pre}.cross.bq"], nh)
            scores = q @ np.swapaxes(state.cross_k[i], -1, -2) * scale
            if state.cross_mask is not None:
                scores = scores + state.cross_mask
            probs = L.softmax(scores)
            ctx = L._merge_heads(probs @ state.cross_v[i])
            x = x + ctx @ p[f"{pre}.cross.wo"] + p[f"{pre}.cross.bo"]

            normed, _ = L.layernorm_fwd(x, p[f"{pre}.ln3.g"], p[f"{pre}.ln3.b"])
            h1 = normed @ p[f"{pre}.ffn.w1"] + p[f"{pre}.ffn.b1"]
            a1, _ = L.gelu_fwd(h1)
            x = x + a1 @ p[f"{pre}.ffn.w2"] + p[f"{pre}.ffn.b2"]

        logits = x[:, 0] @ p["dec.out.w"] + p["dec.out.b"]
        probs = L.softmax(logits)
        new_state = DecoderState(
            self_k=tuple(new_k),
            self_v=tuple(new_v),
            cross_k=state.cross_k,
            cross_v=state.cross_v,
            cross_mask=state.cross_mask,
            position=state.position + 1,
        )
        return probs, new_state

    def generate_batch(
        self,
        enc_states: np.ndarray,
        cross_mask,
        max_len: int,
        bos_id: int,
        eos_id: int,
        sep_id: Optional[int] = None,
        strategy: str = "greedy",
    ) -> list[TargetSequence]:
        """Autoregressive decoding for a padded batch of encoder states.

        Emits at most ``max_len`` tokens per sequence and stops each sequence
        at its end token.  ``strategy`` is "greedy" or "beam:K".
        """
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        if strategy.startswith("beam"):
            k = int(strategy.split(":", 1)[1]) if ":" in strategy else 1
            if k > 1:
                return [
                    self._beam_search(enc_states[b : b + 1], _slice_mask(cross_mask, b),
                                      max_len, bos_id, eos_id, sep_id, k)
                    for b in range(enc_states.shape[0])
                ]
        b = enc_states.shape[0]
        state = self.init_decoder_state(enc_states, cross_mask)
        prev = np.full(b, bos_id, dtype=int)
        done = np.zeros(b, dtype=bool)
        emitted: list[list[int]] = [[] for _ in range(b)]
        for _ in range(max_len):
            probs, state = self.decode_step(state, prev)
            nxt = probs.argmax(axis=-1)
            for j in range(b):
                if not done[j]:
                    emitted[j].append(int(nxt[j]))
                    if nxt[j] == eos_id:
                        done[j] = True
            if done.all():
                break
            prev = np.where(done, eos_id, nxt)
        return [_to_target(tokens, sep_id) for tokens in emitted]

    def _beam_search(self, enc, cross_mask, max_len, bos_id, eos_id, sep_id, k):
        state0 = self.init_decoder_state(enc, cross_mask)
        beams = [(0.0, [bos_id], state0, False)]  # (logprob, tokens, state, done)
        for _ in range(max_len):
            candidates = []
            for logp, toks, state, done in beams:
                if done:
                    candidates.append((logp, toks, state, True))
                    continue
                probs, new_state = self.decode_step(state, np.array([toks[-1]]))
                logprobs = np.log(np.maximum(probs[0], 1e-300))
                for tid in np.argsort(logprobs)[::-1][:k]:
                    candidates.append(
                        (logp + float(logprobs[tid]), toks + [int(tid)], new_state, tid == eos_id)
                    )
            candidates.sort(key=lambda c: c[0], reverse=True)
            beams = candidates[:k]
            if all(c[3] for c in beams):
                break
        best = beams[0]
        return _to_target(best[1][1:], sep_id)

    def generate(
        self,
        features,
        max_len: int,
        bos_id: int,
        eos_id: int,
        sep_id: Optional[int] = None,
        strategy: str = "greedy",
    ) -> TargetSequence:
        """Single-instance generation from FrameFeatures / source token ids."""
        enc = self.encode_instance(features)
        return self.generate_batch(
            enc.states[None], None, max_len, bos_id, eos_id, sep_id, strategy
        )[0]


def _slice_mask(mask, b):
    return None if mask is None else mask[b : b + 1]


def _to_target(tokens: list[int], sep_id: Optional[int]) -> TargetSequence:
    boundary = None
    if sep_id is not None and sep_id in tokens:
        boundary = tokens.index(sep_id) + 1
    return TargetSequence(tokens=tuple(tokens), clue_boundary=boundary)
