"""Building a speech corpus from text annotations.

The construction chain: load/generate text instances, drop unreadable and
event-less ones, flatten hierarchical type labels, synthesize deterministic
pseudo-speech features (one vector pattern per character, repeated per frame,
plus seeded noise), and report corpus statistics.

Run:  python demos/03_dataset_construction.py
"""

from speechee.data import (
    compute_stats,
    filter_empty_events,
    filter_unreadable,
    map_labels,
    synthesize,
)
from speechee.schema import EventRecord, Instance, LabelMapping
from speechee.synth import PseudoSpeechSynthesizer, VoiceConfig
from speechee.toycorpus import generate_toy_corpus

# Text corpora arrive with noise: instances without events, unreadable
# transcripts, hierarchical type names.
raw = [
    Instance(
        id="r1",
        transcript="he was born in Ohio",
        events=(EventRecord("Life:Be-Born", "born", (("Person", "he"),)),),
    ),
    Instance(id="r2", transcript="nothing happens here"),  # no events
    Instance(id="r3", transcript="...", events=()),  # unreadable
]
cleaned = filter_empty_events(filter_unreadable(raw))
print(f"{len(raw)} raw instances -> {len(cleaned)} after filtering")

# Two-level labels become single general-domain words ("Life:Be-Born" -> "born").
mapped = map_labels(cleaned, LabelMapping({"Life:Be-Born": "born"}))
print("mapped type:", mapped[0].events[0].event_type)

# Pseudo-speech synthesis: deterministic, affine duration, two voices.
adapter = PseudoSpeechSynthesizer(frames_per_char=2, noise_scale=0.3)
voices = [VoiceConfig("female", 1), VoiceConfig("male", 2)]
with_speech, failures = synthesize(mapped, adapter, voices)
print(f"\nsynthesized {len(with_speech)} instances ({len(failures)} failures)")
for inst in with_speech:
    print(
        f"  {inst.id:<12} voice={inst.voice:<6} frames={inst.speech.frames.shape} "
        f"duration={inst.speech.duration:.2f}s"
    )

# The bundled toy grammar generates a whole train/dev/test corpus in one call.
instances, schema = generate_toy_corpus(n_train=200, n_dev=40, n_test=40, seed=0)
instances, _ = synthesize(instances, adapter, [VoiceConfig("v", 0)])
stats = compute_stats(instances)
print(
    f"\ntoy corpus: {stats.split_sizes}, {stats.n_types} event types, "
    f"avg {stats.avg_tokens:.1f} tokens, avg {stats.avg_audio_seconds:.2f}s audio"
)
