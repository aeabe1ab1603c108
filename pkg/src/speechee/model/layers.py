"""Differentiable numpy primitives for the toy encoder-decoder.

Every forward function returns (output, cache); the matching backward
function consumes the upstream gradient plus the cache and returns the input
gradient and per-parameter gradients.  All math is float64 so the analytic
gradients can be verified against central finite differences.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

NEG_INF = -1e30  # additive attention mask value; exact zero after softmax


# ---------------------------------------------------------------- linear

def linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def linear_bwd(g, cache):
    x, w = cache
    gx = g @ w.T
    gw = x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
    gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
    return gx, gw, gb


# ---------------------------------------------------------------- layer norm

def layernorm_fwd(x, gamma, beta, eps=1e-6):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layernorm_bwd(g, cache):
    xhat, inv, gamma = cache
    d = xhat.shape[-1]
    ggamma = (g * xhat).reshape(-1, d).sum(axis=0)
    gbeta = g.reshape(-1, d).sum(axis=0)
    gxhat = g * gamma
    gx = inv * (
        gxhat
        - gxhat.mean(axis=-1, keepdims=True)
        - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return gx, ggamma, gbeta


# ---------------------------------------------------------------- GELU

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu_fwd(x):
    return x * 0.5 * (1.0 + erf(x / _SQRT2)), x


def gelu_bwd(g, x):
    phi = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    return g * (cdf + x * phi)


# ---------------------------------------------------------------- conv1d

def conv1d_fwd(x, w, b, stride=1):
    """Same-ish padded 1-D convolution over time.

    x: [B, T, Cin]; w: [K, Cin, Cout]; zero padding of (K-1)//2 on both ends,
    so T_out = ceil(T / stride) for K = 3.
    """
    k, cin, cout = w.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # [B, T', Cin, K]
    windows = windows[:, ::stride]
    win = np.ascontiguousarray(np.swapaxes(windows, 2, 3))  # [B, T_out, K, Cin]
    out = win.reshape(*win.shape[:2], k * cin) @ w.reshape(k * cin, cout) + b
    return out, (win, w, x.shape, stride)


def conv1d_bwd(g, cache):
    win, w, x_shape, stride = cache
    k, cin, cout = w.shape
    pad = (k - 1) // 2
    b_, t_out = g.shape[0], g.shape[1]
    gw = win.reshape(-1, k * cin).T @ g.reshape(-1, cout)
    gb = g.reshape(-1, cout).sum(axis=0)
    gxp = np.zeros((b_, x_shape[1] + 2 * pad, cin))
    positions = np.arange(t_out) * stride
    for tap in range(k):
        gxp[:, positions + tap] += g @ w[tap].T
    gx = gxp[:, pad : pad + x_shape[1]]
    return gx, gw.reshape(k, cin, cout), gb


# ---------------------------------------------------------------- softmax

def softmax(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_bwd(g, probs):
    return probs * (g - (g * probs).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------- attention

def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def attention_fwd(q_in, kv_in, p, prefix, n_heads, mask=None):
    """Multi-head attention; p maps names to arrays, prefix scopes the block.

    ``mask`` is additive, broadcastable to [B, H, Lq, Lk].  Self-attention
    passes q_in is kv_in; cross-attention passes decoder / encoder states.
    """
    q_lin, cq = linear_fwd(q_in, p[f"{prefix}.wq"], p[f"{prefix}.bq"])
    k_lin, ck = linear_fwd(kv_in, p[f"{prefix}.wk"], p[f"{prefix}.bk"])
    v_lin, cv = linear_fwd(kv_in, p[f"{prefix}.wv"], p[f"{prefix}.bv"])
    q = _split_heads(q_lin, n_heads)
    k = _split_heads(k_lin, n_heads)
    v = _split_heads(v_lin, n_heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = q @ np.swapaxes(k, -1, -2) * scale
    if mask is not None:
        scores = scores + mask
    probs = softmax(scores)
    ctx = probs @ v
    merged = _merge_heads(ctx)
    out, co = linear_fwd(merged, p[f"{prefix}.wo"], p[f"{prefix}.bo"])
    cache = (cq, ck, cv, q, k, v, probs, co, scale, n_heads)
    return out, cache


def attention_bwd(g, cache, grads, prefix):
    cq, ck, cv, q, k, v, probs, co, scale, n_heads = cache
    g_merged, gwo, gbo = linear_bwd(g, co)
    grads[f"{prefix}.wo"] += gwo
    grads[f"{prefix}.bo"] += gbo
    g_ctx = _split_heads(g_merged, n_heads)
    g_probs = g_ctx @ np.swapaxes(v, -1, -2)
    g_v = np.swapaxes(probs, -1, -2) @ g_ctx
    g_scores = softmax_bwd(g_probs, probs) * scale
    g_q = g_scores @ k
    g_k = np.swapaxes(g_scores, -1, -2) @ q
    gq_in, gwq, gbq = linear_bwd(_merge_heads(g_q), cq)
    gk_in, gwk, gbk = linear_bwd(_merge_heads(g_k), ck)
    gv_in, gwv, gbv = linear_bwd(_merge_heads(g_v), cv)
    grads[f"{prefix}.wq"] += gwq
    grads[f"{prefix}.bq"] += gbq
    grads[f"{prefix}.wk"] += gwk
    grads[f"{prefix}.bk"] += gbk
    grads[f"{prefix}.wv"] += gwv
    grads[f"{prefix}.bv"] += gbv
    return gq_in, gk_in + gv_in


# ---------------------------------------------------------------- positions

def sinusoid_positions(length: int, d_model: int) -> np.ndarray:
    """Interleaved sine/cosine position table [length, d_model]."""
    pos = np.arange(length)[:, None]
    i = np.arange(d_model // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


# ---------------------------------------------------------------- embedding

def embedding_fwd(ids, table):
    return table[ids], (ids, table.shape)


def embedding_bwd(g, cache):
    ids, shape = cache
    gt = np.zeros(shape)
    np.add.at(gt, ids.reshape(-1), g.reshape(-1, shape[1]))
    return gt


# ---------------------------------------------------------------- masks

def causal_mask(length: int) -> np.ndarray:
    """[1, 1, L, L] additive mask hiding future positions."""
    m = np.triu(np.full((length, length), NEG_INF), k=1)
    return m[None, None]


def padding_mask(lengths: np.ndarray, max_len: int) -> np.ndarray:
    """[B, 1, 1, L] additive mask hiding positions beyond each length."""
    ar = np.arange(max_len)[None, :]
    pad = ar >= np.asarray(lengths)[:, None]
    return np.where(pad, NEG_INF, 0.0)[:, None, None, :]
