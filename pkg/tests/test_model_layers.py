"""Per-primitive gradient checks against central finite differences."""

import numpy as np
import pytest

from speechee.model import layers as L

from gradcheck import max_rel_err, numeric_grad

rng = np.random.default_rng(42)

TOL = 1e-6  # isolated primitives at double precision are essentially exact


class TestLinear:
    def test_grads(self):
        x = rng.normal(size=(2, 5, 4))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=3)
        target = rng.normal(size=(2, 5, 3))

        def loss():
            y, _ = L.linear_fwd(x, w, b)
            return float(((y - target) ** 2).sum())

        y, cache = L.linear_fwd(x, w, b)
        gx, gw, gb = L.linear_bwd(2 * (y - target), cache)
        assert max_rel_err(gx, numeric_grad(loss, x)) < TOL
        assert max_rel_err(gw, numeric_grad(loss, w)) < TOL
        assert max_rel_err(gb, numeric_grad(loss, b)) < TOL


class TestLayerNorm:
    def test_grads(self):
        x = rng.normal(size=(3, 4, 6))
        gamma = rng.normal(size=6)
        beta = rng.normal(size=6)
        target = rng.normal(size=(3, 4, 6))

        def loss():
            y, _ = L.layernorm_fwd(x, gamma, beta)
            return float(((y - target) ** 2).sum())

        y, cache = L.layernorm_fwd(x, gamma, beta)
        gx, ggamma, gbeta = L.layernorm_bwd(2 * (y - target), cache)
        assert max_rel_err(gx, numeric_grad(loss, x)) < 1e-5
        assert max_rel_err(ggamma, numeric_grad(loss, gamma)) < 1e-5
        assert max_rel_err(gbeta, numeric_grad(loss, beta)) < 1e-5

    def test_output_statistics(self):
        x = rng.normal(size=(2, 7, 32)) * 3 + 1
        y, _ = L.layernorm_fwd(x, np.ones(32), np.zeros(32))
        assert np.allclose(y.mean(axis=-1), 0.0, atol=1e-10)
        assert np.allclose(y.var(axis=-1), 1.0, atol=1e-5)


class TestGelu:
    def test_grads(self):
        x = rng.normal(size=(4, 5))
        target = rng.normal(size=(4, 5))

        def loss():
            y, _ = L.gelu_fwd(x)
            return float(((y - target) ** 2).sum())

        y, cache = L.gelu_fwd(x)
        gx = L.gelu_bwd(2 * (y - target), cache)
        assert max_rel_err(gx, numeric_grad(loss, x)) < TOL

    def test_known_values(self):
        y, _ = L.gelu_fwd(np.array([0.0]))
        assert y[0] == 0.0
        y, _ = L.gelu_fwd(np.array([10.0]))
        assert y[0] == pytest.approx(10.0, abs=1e-9)


class TestConv1d:
    @pytest.mark.parametrize("stride,t", [(1, 6), (2, 6), (2, 7), (2, 1)])
    def test_grads(self, stride, t):
        x = rng.normal(size=(2, t, 3))
        w = rng.normal(size=(3, 3, 4))
        b = rng.normal(size=4)
        out, cache = L.conv1d_fwd(x, w, b, stride=stride)
        target = rng.normal(size=out.shape)

        def loss():
            y, _ = L.conv1d_fwd(x, w, b, stride=stride)
            return float(((y - target) ** 2).sum())

        gx, gw, gb = L.conv1d_bwd(2 * (out - target), cache)
        assert max_rel_err(gx, numeric_grad(loss, x)) < TOL
        assert max_rel_err(gw, numeric_grad(loss, w)) < TOL
        assert max_rel_err(gb, numeric_grad(loss, b)) < TOL

    def test_output_length(self):
        x = np.zeros((1, 100, 3))
        w = np.zeros((3, 3, 4))
        out, _ = L.conv1d_fwd(x, w, np.zeros(4), stride=2)
        assert out.shape == (1, 50, 4)

    def test_matches_naive_loop(self):
        # independent oracle: per-position dot products
        x = rng.normal(size=(1, 9, 2))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=5)
        out, _ = L.conv1d_fwd(x, w, b, stride=2)
        xp = np.pad(x, ((0, 0), (1, 1), (0, 0)))
        for t_out in range(out.shape[1]):
            expected = b.copy()
            for tap in range(3):
                expected = expected + xp[0, 2 * t_out + tap] @ w[tap]
            np.testing.assert_allclose(out[0, t_out], expected, rtol=1e-12)


class TestAttention:
    def _params(self, d):
        p = {}
        for nm in ("wq", "wk", "wv", "wo"):
            p[f"a.{nm}"] = rng.normal(size=(d, d)) * 0.3
        for nm in ("bq", "bk", "bv", "bo"):
            p[f"a.{nm}"] = rng.normal(size=d) * 0.1
        return p

    def test_self_attention_grads(self):
        d = 4
        p = self._params(d)
        x = rng.normal(size=(2, 5, d))
        out, _ = L.attention_fwd(x, x, p, "a", n_heads=2)
        target = rng.normal(size=out.shape)

        def loss():
            y, _ = L.attention_fwd(x, x, p, "a", n_heads=2)
            return float(((y - target) ** 2).sum())

        out, cache = L.attention_fwd(x, x, p, "a", n_heads=2)
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        gq, gkv = L.attention_bwd(2 * (out - target), cache, grads, "a")
        assert max_rel_err(gq + gkv, numeric_grad(loss, x)) < 1e-5
        for name in p:
            assert max_rel_err(grads[name], numeric_grad(loss, p[name])) < 1e-5, name

    def test_cross_attention_grads_and_mask(self):
        d = 4
        p = self._params(d)
        q_in = rng.normal(size=(1, 3, d))
        kv_in = rng.normal(size=(1, 6, d))
        mask = L.padding_mask(np.array([4]), 6)
        out, cache = L.attention_fwd(q_in, kv_in, p, "a", n_heads=2, mask=mask)
        target = rng.normal(size=out.shape)

        def loss():
            y, _ = L.attention_fwd(q_in, kv_in, p, "a", n_heads=2, mask=mask)
            return float(((y - target) ** 2).sum())

        grads = {k: np.zeros_like(v) for k, v in p.items()}
        gq, gkv = L.attention_bwd(2 * (out - target), cache, grads, "a")
        assert max_rel_err(gq, numeric_grad(loss, q_in)) < 1e-5
        assert max_rel_err(gkv, numeric_grad(loss, kv_in)) < 1e-5
        # masked keys receive no gradient
        assert np.allclose(gkv[0, 4:], 0.0)

    def test_masked_positions_have_zero_weight(self):
        d = 4
        p = self._params(d)
        x = rng.normal(size=(1, 5, d))
        mask = L.padding_mask(np.array([3]), 5)
        _, cache = L.attention_fwd(x, x, p, "a", n_heads=2, mask=mask)
        probs = cache[6]
        assert np.allclose(probs[..., 3:], 0.0)
        assert np.allclose(probs.sum(axis=-1), 1.0)


class TestEmbeddingAndSoftmax:
    def test_embedding_grads(self):
        table = rng.normal(size=(7, 3))
        ids = np.array([[0, 2, 2], [5, 1, 0]])
        out, cache = L.embedding_fwd(ids, table)
        target = rng.normal(size=out.shape)

        def loss():
            y, _ = L.embedding_fwd(ids, table)
            return float(((y - target) ** 2).sum())

        gt = L.embedding_bwd(2 * (out - target), cache)
        assert max_rel_err(gt, numeric_grad(loss, table)) < TOL

    def test_softmax_rows_sum_to_one(self):
        s = rng.normal(size=(3, 4, 5)) * 10
        p = L.softmax(s)
        assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)

    def test_sinusoid_shape_and_range(self):
        pe = L.sinusoid_positions(12, 8)
        assert pe.shape == (12, 8)
        assert np.all(np.abs(pe) <= 1.0)
        # distinct positions get distinct encodings
        assert not np.allclose(pe[0], pe[1])
