"""Network-level contracts: shapes, causality, loss identities, generation."""

import numpy as np
import pytest

from speechee.model import layers as L
from speechee.model.checkpoint import load_checkpoint, save_checkpoint
from speechee.model.network import ModelConfig, SpeechToStructure
from speechee.model.optim import AdamW, OptimizerConfig
from speechee.model.targets import build_target, split_output
from speechee.model.training import Batch, collate
from speechee.vocab import Vocabulary, build_vocabulary
from speechee.schema import EventRecord, Instance

from gradcheck import model_grad_errors

rng = np.random.default_rng(7)


def small_model(vocab_size=13, **kw) -> SpeechToStructure:
    defaults = dict(d_model=16, n_heads=2, d_ff=32, n_encoder_layers=2, n_decoder_layers=2)
    defaults.update(kw)
    return SpeechToStructure(ModelConfig(vocab_size=vocab_size, **defaults))


def random_batch(model, b=2, t=9, l=5, seed=3):
    r = np.random.default_rng(seed)
    v = model.cfg.vocab_size
    return Batch(
        source=r.normal(size=(b, t, 80)),
        source_lengths=np.array([t] + [max(t - 3, 1)] * (b - 1)),
        tokens_in=r.integers(0, v, size=(b, l)),
        tokens_out=r.integers(0, v, size=(b, l)),
        loss_mask=np.ones((b, l)),
    )


class TestFrontEnd:
    def test_downsampling_shape(self):
        m = small_model()
        out, _ = m.extract_features(rng.normal(size=(1, 100, 80)))
        assert out.shape == (1, 50, m.cfg.d_model)

    def test_minimal_length(self):
        m = small_model()
        out, _ = m.extract_features(rng.normal(size=(1, 1, 80)))
        assert out.shape == (1, 1, m.cfg.d_model)

    def test_wrong_channels_rejected(self):
        m = small_model()
        with pytest.raises(ValueError):
            m.extract_features(rng.normal(size=(1, 10, 40)))

    def test_zero_input_with_zero_weights_reduces_to_biases_plus_positions(self):
        m = small_model()
        p = m.params.values
        p["enc.conv1.w"][...] = 0.0
        p["enc.conv2.w"][...] = 0.0
        p["enc.conv1.b"][...] = rng.normal(size=m.cfg.d_model)
        p["enc.conv2.b"][...] = rng.normal(size=m.cfg.d_model)
        out, _ = m.extract_features(np.zeros((1, 8, 80)))
        gelu_b2, _ = L.gelu_fwd(p["enc.conv2.b"])
        expected = gelu_b2[None] + L.sinusoid_positions(4, m.cfg.d_model)
        np.testing.assert_allclose(out[0], expected, atol=1e-12)


class TestEncoder:
    def test_identity_when_residual_branches_zeroed(self):
        m = small_model(n_encoder_layers=1)
        p = m.params.values
        p["enc.l0.attn.wo"][...] = 0.0
        p["enc.l0.ffn.w2"][...] = 0.0
        x = rng.normal(size=(1, 6, m.cfg.d_model))
        out, _ = m.encode(x)
        np.testing.assert_array_equal(out, x)

    def test_permutation_equivariance_without_positions(self):
        m = small_model()
        x = rng.normal(size=(1, 7, m.cfg.d_model))
        perm = np.array([3, 1, 0, 6, 5, 2, 4])
        out, _ = m.encode(x)
        out_perm, _ = m.encode(x[:, perm])
        np.testing.assert_allclose(out_perm, out[:, perm], atol=1e-10)

    def test_layernorm_internal_statistics(self):
        m = small_model()
        internals = {}
        x = rng.normal(size=(2, 6, m.cfg.d_model)) * 2.5 + 0.7
        m.encode(x, internals=internals)
        assert len(internals["ln_outputs"]) == 2 * m.cfg.n_encoder_layers
        for ln_out in internals["ln_outputs"]:
            assert np.allclose(ln_out.mean(axis=-1), 0.0, atol=1e-10)
            assert np.allclose(ln_out.var(axis=-1), 1.0, atol=1e-5)

    def test_padding_invariance(self):
        # a sequence alone vs. padded inside a batch: identical valid states
        m = small_model()
        feats = rng.normal(size=(9, 80))
        other = rng.normal(size=(15, 80))
        single = m.encode_instance(feats).states
        padded = np.zeros((2, 15, 80))
        padded[0, :9] = feats
        padded[1] = other
        f, _ = m.extract_features(padded, np.array([9, 15]))
        red = np.array([m.reduced_length(9), m.reduced_length(15)])
        mask = L.padding_mask(red, f.shape[1])
        enc, _ = m.encode(f, mask)
        np.testing.assert_allclose(enc[0, : m.reduced_length(9)], single, atol=1e-10)


class TestDecodeStep:
    def test_distribution_sums_to_one(self):
        m = small_model()
        enc = rng.normal(size=(11, m.cfg.d_model))
        state = m.init_decoder_state(enc[None])
        probs, _ = m.decode_step(state, np.array([1]))
        assert probs.shape == (1, m.cfg.vocab_size)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_unknown_token_rejected(self):
        m = small_model()
        state = m.init_decoder_state(rng.normal(size=(1, 4, m.cfg.d_model)))
        with pytest.raises(ValueError):
            m.decode_step(state, np.array([m.cfg.vocab_size]))

    def test_causality_future_token_does_not_change_past_logits(self):
        m = small_model()
        batch = random_batch(m, b=1, l=6)
        enc, src_mask, _ = m.forward_batch(batch)
        logits_a, _ = m.decode_teacher_forced(batch.tokens_in, enc, cross_mask=src_mask)
        tokens_b = batch.tokens_in.copy()
        tokens_b[0, 4] = (tokens_b[0, 4] + 1) % m.cfg.vocab_size
        logits_b, _ = m.decode_teacher_forced(tokens_b, enc, cross_mask=src_mask)
        np.testing.assert_array_equal(logits_a[0, :4], logits_b[0, :4])
        assert not np.array_equal(logits_a[0, 4:], logits_b[0, 4:])

    def test_incremental_matches_teacher_forced(self):
        m = small_model()
        batch = random_batch(m, b=2, l=7)
        enc, src_mask, _ = m.forward_batch(batch)
        logits, _ = m.decode_teacher_forced(batch.tokens_in, enc, cross_mask=src_mask)
        full_probs = L.softmax(logits)
        state = m.init_decoder_state(enc, src_mask)
        for t in range(batch.tokens_in.shape[1]):
            step_probs, state = m.decode_step(state, batch.tokens_in[:, t])
            np.testing.assert_allclose(step_probs, full_probs[:, t], atol=1e-9)

    def test_state_append_does_not_mutate_history(self):
        m = small_model()
        state0 = m.init_decoder_state(rng.normal(size=(1, 5, m.cfg.d_model)))
        _, state1 = m.decode_step(state0, np.array([2]))
        snapshot = state1.self_k[0].copy()
        m.decode_step(state1, np.array([3]))
        np.testing.assert_array_equal(state1.self_k[0], snapshot)
        assert state0.self_k[0].shape[2] == 0


class TestTargets:
    @pytest.fixture()
    def vocab(self):
        instances = [
            Instance(
                id="a",
                transcript="the man returned to Los Angeles",
                events=(
                    EventRecord(
                        "Transport", "returned", (("Destination", "Los Angeles"),)
                    ),
                ),
            )
        ]
        return build_vocabulary(instances)

    def test_build_with_clue_layout(self, vocab):
        rec = EventRecord("Transport", "returned", (("Destination", "Los Angeles"),))
        tgt = build_target("the man returned to Los Angeles", [rec], "flat", True, vocab)
        toks = list(tgt.tokens)
        assert toks[-1] == vocab.eos_id
        sep_idx = toks.index(vocab.sep_id)
        assert tgt.clue_boundary == sep_idx + 1
        assert vocab.decode(toks[:sep_idx]) == "the man returned to los angeles"
        assert vocab.decode(toks[sep_idx + 1 : -1]) == (
            "<type> transport <trigger> returned <role> destination <argument> los angeles"
        )

    def test_empty_without_clue_is_just_eos(self, vocab):
        tgt = build_target("anything", [], "flat", False, vocab)
        assert list(tgt.tokens) == [vocab.eos_id]
        assert tgt.clue_boundary is None

    def test_without_clue_has_no_transcript_tokens(self, vocab):
        rec = EventRecord("Transport", "returned", ())
        with_clue = build_target("the man returned", [rec], "flat", True, vocab)
        without = build_target("the man returned", [rec], "flat", False, vocab)
        assert vocab.sep_id not in without.tokens
        assert len(without.tokens) < len(with_clue.tokens)

    def test_split_output_round_trip(self, vocab):
        rec = EventRecord("Transport", "returned", (("Destination", "Los Angeles"),))
        tgt = build_target("the man returned", [rec], "flat", True, vocab)
        transcript, event_seq = split_output(tgt, vocab, "flat")
        assert transcript == "the man returned"
        assert event_seq.text == (
            "<type> transport <trigger> returned <role> destination <argument> los angeles"
        )

    def test_split_output_without_separator(self, vocab):
        from speechee.model.network import TargetSequence

        tgt = TargetSequence(tokens=(8, 9, vocab.eos_id), clue_boundary=None)
        transcript, event_seq = split_output(tgt, vocab)
        assert transcript == ""
        assert event_seq.text == vocab.decode([8, 9])

    def test_split_output_separator_first(self, vocab):
        from speechee.model.network import TargetSequence

        tgt = TargetSequence(tokens=(vocab.sep_id, 8, vocab.eos_id), clue_boundary=1)
        transcript, event_seq = split_output(tgt, vocab)
        assert transcript == ""
        assert event_seq.text == vocab.decode([8])


class TestLoss:
    def test_uniform_distribution_loss_is_log_vocab(self):
        m = small_model()
        m.params.values["dec.out.w"][...] = 0.0
        m.params.values["dec.out.b"][...] = 0.0
        batch = random_batch(m)
        loss, _, stats = m.loss_and_grads(batch, want_grads=False)
        assert stats["per_token_nll"] == pytest.approx(np.log(m.cfg.vocab_size), abs=1e-10)

    def test_single_token_loss_is_neg_log_p(self):
        m = small_model()
        batch = random_batch(m, b=1, l=1)
        enc, src_mask, _ = m.forward_batch(batch)
        logits, _ = m.decode_teacher_forced(batch.tokens_in, enc, cross_mask=src_mask)
        p = L.softmax(logits)[0, 0, batch.tokens_out[0, 0]]
        loss, _, _ = m.loss_and_grads(batch, want_grads=False)
        assert loss == pytest.approx(-np.log(p), rel=1e-12)

    def test_sequence_likelihood_factorizes_over_steps(self):
        # loss of one sequence equals the sum of stepwise -log p via the
        # incremental decoder (cumulative-product identity, in log space)
        m = small_model()
        batch = random_batch(m, b=1, l=6)
        loss, _, _ = m.loss_and_grads(batch, want_grads=False)
        enc, src_mask, _ = m.forward_batch(batch)
        state = m.init_decoder_state(enc, src_mask)
        total = 0.0
        for t in range(batch.tokens_in.shape[1]):
            probs, state = m.decode_step(state, batch.tokens_in[:, t])
            total -= np.log(probs[0, batch.tokens_out[0, t]])
        assert loss == pytest.approx(total, abs=1e-6)

    def test_nan_loss_aborts_with_diagnostics(self):
        m = small_model()
        m.params.values["dec.out.w"][...] = np.inf
        with pytest.raises(FloatingPointError):
            m.loss_and_grads(random_batch(m), want_grads=False)

    def test_full_model_gradients_small(self):
        m = small_model(vocab_size=11, d_model=8, n_heads=2, d_ff=12,
                        n_encoder_layers=1, n_decoder_layers=1)
        batch = random_batch(m, b=2, t=5, l=4)
        errors = model_grad_errors(m, batch)
        worst = max(errors.values())
        assert worst < 1e-4, sorted(errors.items(), key=lambda kv: -kv[1])[:5]

    def test_text_mode_gradients_small(self):
        m = SpeechToStructure(
            ModelConfig(vocab_size=11, d_model=8, n_heads=2, d_ff=12,
                        n_encoder_layers=1, n_decoder_layers=1, input_kind="text")
        )
        r = np.random.default_rng(5)
        batch = Batch(
            source=r.integers(0, 11, size=(2, 6)),
            source_lengths=np.array([6, 4]),
            tokens_in=r.integers(0, 11, size=(2, 4)),
            tokens_out=r.integers(0, 11, size=(2, 4)),
            loss_mask=np.ones((2, 4)),
        )
        errors = model_grad_errors(m, batch)
        assert max(errors.values()) < 1e-4


class TestFreezing:
    def test_frozen_encoder_is_bit_identical_after_step(self):
        m = small_model()
        m.params.frozen_groups = frozenset({"encoder"})
        before = {k: v.copy() for k, v in m.params.values.items()}
        opt = AdamW(m.params, OptimizerConfig(lr=1e-2, total_steps=10, warmup_ratio=0.0))
        loss, grads, _ = m.loss_and_grads(random_batch(m))
        for name, g in grads.items():
            if name.startswith("enc."):
                assert np.all(g == 0.0), name
        opt.step(grads)
        for name, value in m.params.values.items():
            if name.startswith("enc."):
                np.testing.assert_array_equal(value, before[name])
            elif name.startswith("dec.embed") or name.startswith("dec.out"):
                assert not np.array_equal(value, before[name]), name


class TestGenerate:
    def test_max_len_one_emits_at_most_one_token(self):
        m = small_model()
        seq = m.generate(rng.normal(size=(8, 80)), max_len=1, bos_id=1, eos_id=2)
        assert len(seq.tokens) <= 1

    def test_greedy_is_deterministic(self):
        m = small_model()
        feats = rng.normal(size=(10, 80))
        a = m.generate(feats, max_len=8, bos_id=1, eos_id=2)
        b = m.generate(feats, max_len=8, bos_id=1, eos_id=2)
        assert a.tokens == b.tokens

    def test_beam_one_equals_greedy(self):
        m = small_model()
        feats = rng.normal(size=(10, 80))
        greedy = m.generate(feats, max_len=8, bos_id=1, eos_id=2, strategy="greedy")
        beam = m.generate(feats, max_len=8, bos_id=1, eos_id=2, strategy="beam:1")
        assert greedy.tokens == beam.tokens

    def test_beam_search_runs_and_respects_cap(self):
        m = small_model()
        feats = rng.normal(size=(10, 80))
        seq = m.generate(feats, max_len=6, bos_id=1, eos_id=2, strategy="beam:3")
        assert len(seq.tokens) <= 6

    def test_cap_never_exceeded_across_inputs(self):
        m = small_model()
        for t in (3, 9, 21):
            seq = m.generate(rng.normal(size=(t, 80)), max_len=5, bos_id=1, eos_id=2)
            assert len(seq.tokens) <= 5


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        m = small_model()
        vocab = Vocabulary(
            tokens=("<pad>", "<bos>", "<eos>", "<unk>", "<sep>", "<type>", "<trigger>",
                    "<role>", "<argument>", "(", ")", "a", "b"),
            mode="word",
        )
        save_checkpoint(tmp_path / "ckpt", m, vocab, "flat", True, extra={"note": "t"})
        m2, vocab2, fmt, with_clue = load_checkpoint(tmp_path / "ckpt")
        assert fmt == "flat" and with_clue is True
        assert vocab2.tokens == vocab.tokens
        assert m2.cfg == m.cfg
        for name, value in m.params.values.items():
            np.testing.assert_array_equal(value, m2.params.values[name])
        feats = rng.normal(size=(7, 80))
        assert m.generate(feats, 6, 1, 2).tokens == m2.generate(feats, 6, 1, 2).tokens
