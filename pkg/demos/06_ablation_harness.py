"""The experiment harness: seeded grids, reports, and the length ablation.

Runs a miniature clue ablation (both conditions, one seed) through the same
machinery the acceptance suite uses, then sweeps the generation length cap on
the trained checkpoint.  Everything lands under demos/_runs/: per-run reports
and checkpoints, aggregated report.json, raw_scores.csv, CSV curves, and SVG
charts.  Rerunning is a no-op thanks to content-hash resume.

Run:  python demos/06_ablation_harness.py
"""

from pathlib import Path

from speechee.harness import ExperimentConfig, ablate_length, run_experiment

out = Path(__file__).parent / "_runs" / "clue_ablation"
config = ExperimentConfig.from_dict(
    {
        "name": "demo-clue-ablation",
        "out_dir": str(out),
        "seeds": [0],
        "formats": ["flat"],
        "clues": [True, False],
        "input_kind": "speech",
        "data": {"kind": "toy", "n_train": 500, "n_dev": 60, "n_test": 60, "seed": 0},
        "synth": {"frames_per_char": 2, "noise_scale": 0.3},
        "model": {"d_model": 48, "n_heads": 4, "d_ff": 128},
        "train": {"epochs": 8, "batch_size": 16, "lr": 3e-3},
        "eval": {"max_len": 48},
    }
)

report = run_experiment(config)
print("conditions:")
for row in report.rows:
    print(
        f"  {row['condition']:<12} trig-c F1 {row['mean']['trig-c']['f1']:.3f} "
        f"(ill-formed rate {row['ill_formed_rate_mean']:.3f})"
    )

gap = (
    report.row("flat+clue")["mean"]["trig-c"]["f1"]
    - report.row("flat-noclue")["mean"]["trig-c"]["f1"]
)
print(f"clue gap at this scale: {gap:+.3f}")

ckpt = out / "runs" / "flat+clue" / "seed0" / "checkpoint"
print("\nlength ablation (inference only, no retraining):")
rows = ablate_length(ckpt, config, grid=[8, 16, 32, 48], out_dir=out / "length")
for row in rows:
    m = row["test"]["metrics"]["trig-c"]
    print(
        f"  cap {row['max_len']:>3}: recall {m['r']:.3f} F1 {m['f1']:.3f} "
        f"(longest generation {row['max_tokens']} tokens)"
    )
print(f"\nartifacts under {out}")
