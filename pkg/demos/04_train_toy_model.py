"""Training the speech-to-structure model on the toy grammar.

End to end at reduced scale so it finishes in about a minute on a laptop:
generate a corpus, synthesize pseudo-speech, train with the transcript clue
enabled, then inspect generations.  The decoder emits the transcript first,
a separator, then the flat event sequence; splitting at the separator gives
both the recognized text and the parseable structure.

Run:  python demos/04_train_toy_model.py
"""

from speechee.data import split_of, synthesize
from speechee.metrics import MetricKind, score_corpus
from speechee.model.network import ModelConfig, SpeechToStructure
from speechee.model.training import TrainConfig, predict_instances, train
from speechee.synth import PseudoSpeechSynthesizer, VoiceConfig
from speechee.toycorpus import generate_toy_corpus
from speechee.vocab import build_vocabulary

# Reduced corpus with easy (full-rank, low-noise) features so the demo
# converges in under two minutes.  The acceptance suite trains on 2,000
# instances with confusable subspace features instead.
instances, schema = generate_toy_corpus(n_train=800, n_dev=100, n_test=100, seed=0)
adapter = PseudoSpeechSynthesizer(frames_per_char=2, noise_scale=0.3)
instances, _ = synthesize(instances, adapter, [VoiceConfig("v", 0)], seed=0)
vocab = build_vocabulary(instances)
train_set, dev, test = (split_of(instances, s) for s in ("train", "dev", "test"))
print(f"corpus ready: {len(train_set)} train / {len(dev)} dev / {len(test)} test, "
      f"vocab {len(vocab)}")

model = SpeechToStructure(
    ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, d_ff=256, seed=0)
)
cfg = TrainConfig(epochs=10, batch_size=16, lr=3e-3, warmup_ratio=0.2, seed=0, max_gen_len=48)
result = train(model, vocab, schema, train_set, dev, fmt="flat", with_clue=True, cfg=cfg)
for row in result.history:
    dev_f1 = row.get("dev_trig_c_f1", float("nan"))
    print(f"epoch {row['epoch']}: per-token nll {row['per_token_nll']:.3f} "
          f"dev trig-c F1 {dev_f1:.3f}")

preds = predict_instances(model, vocab, schema, test, fmt="flat", max_len=48)
report = score_corpus(
    {iid: p["records"] for iid, p in preds.items()},
    {inst.id: list(inst.events) for inst in test},
)
print("\ntest scores:")
for kind in (MetricKind.TRIG_I, MetricKind.TRIG_C, MetricKind.ARG_C):
    print(f"  {kind.value}: F1 {report.f1(kind):.3f}")

print("\nsample generations (transcript | parsed events):")
for inst in test[:4]:
    p = preds[inst.id]
    events = "; ".join(
        f"{r.event_type}({r.trigger})" for r in p["records"]
    ) or "none"
    print(f"  gold: {inst.transcript}")
    print(f"  hyp : {p['transcript']}  ->  {events}\n")
