"""Experiment orchestration: reproducible condition x seed grids with reports.

A single TOML config determines everything: data (generated toy corpus or
JSONL files), model dimensions, training recipe, the condition grid (formats,
clue on/off), seeds, and evaluation length.  Each run writes only inside its
own ``<out>/runs/<condition>/seed<k>/`` directory and is skipped on rerun
when its content hash already matches, so interrupted grids resume cleanly.
Reports carry no timestamps; identical config + seed reruns are byte
identical.
"""

from __future__ import annotations

import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .codec import FORMATS
from .data import load_corpus, load_schema, save_schema, split_of, synthesize
from .metrics import MetricKind, MetricReport, score_corpus
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.network import ModelConfig, SpeechToStructure
from .model.training import TrainConfig, predict_instances, train
from .schema import Instance, Schema
from .synth import PseudoSpeechSynthesizer, VoiceConfig
from .toycorpus import generate_toy_corpus
from .util import canonical_json, read_json, stable_hash_hex, write_json
from .vocab import Vocabulary, build_vocabulary

WORKERS_ENV = "SPEECHEE_WORKERS"

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a grid needs; (config, code version) determines results."""

    name: str
    out_dir: str
    seeds: tuple[int, ...] = (0,)
    formats: tuple[str, ...] = ("flat",)
    clues: tuple[bool, ...] = (True,)
    input_kind: str = "speech"
    data: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)

    def __post_init__(self):
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ValueError(f"unknown format {fmt!r}")
        if self.input_kind not in ("speech", "text"):
            raise ValueError(f"unknown input_kind {self.input_kind!r}")

    @property
    def max_len(self) -> int:
        return int(self.eval.get("max_len", 48))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "out_dir": self.out_dir,
            "seeds": list(self.seeds),
            "formats": list(self.formats),
            "clues": list(self.clues),
            "input_kind": self.input_kind,
            "data": dict(self.data),
            "synth": dict(self.synth),
            "model": dict(self.model),
            "train": dict(self.train),
            "eval": dict(self.eval),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        exp = dict(d.get("experiment", {}))
        return cls(
            name=exp.get("name", d.get("name", "experiment")),
            out_dir=exp.get("out_dir", d.get("out_dir", "runs")),
            seeds=tuple(exp.get("seeds", d.get("seeds", [0]))),
            formats=tuple(exp.get("formats", d.get("formats", ["flat"]))),
            clues=tuple(bool(c) for c in exp.get("clues", d.get("clues", [True]))),
            input_kind=exp.get("input_kind", d.get("input_kind", "speech")),
            data=dict(d.get("data", {})),
            synth=dict(d.get("synth", {})),
            model=dict(d.get("model", {})),
            train=dict(d.get("train", {})),
            eval=dict(d.get("eval", {})),
        )

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as f:
            return cls.from_dict(tomllib.load(f))

    def to_toml(self) -> str:
        lines = ["[experiment]"]
        lines.append(f'name = "{self.name}"')
        lines.append(f'out_dir = "{self.out_dir}"')
        lines.append(f"seeds = {list(self.seeds)}")
        lines.append(f'formats = {_toml_str_list(self.formats)}')
        lines.append(f"clues = {[str(c).lower() for c in self.clues]}".replace("'", ""))
        lines.append(f'input_kind = "{self.input_kind}"')
        for section in ("data", "synth", "model", "train", "eval"):
            values = getattr(self, section)
            if not values:
                continue
            lines.append("")
            lines.append(f"[{section}]")
            for key in sorted(values):
                lines.append(f"{key} = {_toml_value(values[key])}")
        return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def _toml_str_list(xs) -> str:
    return "[" + ", ".join(f'"{x}"' for x in xs) + "]"


# ------------------------------------------------------------------ data


def prepare_data(
    config: ExperimentConfig,
) -> tuple[list[Instance], list[Instance], list[Instance], Schema]:
    """Materialize the corpus: generated toy grammar or JSONL files.

    Speech-input experiments synthesize features with the (deterministic)
    pseudo-speech adapter configured in [synth].
    """
    data = config.data
    kind = data.get("kind", "toy")
    if kind == "toy":
        instances, schema = generate_toy_corpus(
            n_train=int(data.get("n_train", 2000)),
            n_dev=int(data.get("n_dev", 200)),
            n_test=int(data.get("n_test", 300)),
            seed=int(data.get("seed", 0)),
            two_event_prob=float(data.get("two_event_prob", 0.2)),
            filler_prob=float(data.get("filler_prob", 0.3)),
        )
    elif kind == "files":
        schema = load_schema(data["schema"])
        instances = []
        for split in ("train", "dev", "test"):
            if split in data:
                instances.extend(load_corpus(data[split], schema))
    else:
        raise ValueError(f"unknown data kind {kind!r}")
    if config.input_kind == "speech":
        synth_cfg = config.synth
        adapter = PseudoSpeechSynthesizer(
            frames_per_char=int(synth_cfg.get("frames_per_char", 2)),
            noise_scale=float(synth_cfg.get("noise_scale", 0.6)),
            subspace_dim=(
                int(synth_cfg["subspace_dim"]) if synth_cfg.get("subspace_dim") else None
            ),
        )
        voices = [
            VoiceConfig(f"voice{i}", int(synth_cfg.get("voice_seed", 0)) + i)
            for i in range(int(synth_cfg.get("voices", 1)))
        ]
        instances, failures = synthesize(
            instances, adapter, voices, seed=int(synth_cfg.get("seed", 0))
        )
        if failures:
            raise RuntimeError(f"synthesis failed for {len(failures)} instances")
    return (
        split_of(instances, "train"),
        split_of(instances, "dev"),
        split_of(instances, "test"),
        schema,
    )


# ------------------------------------------------------------------ one run


def condition_name(fmt: str, with_clue: bool) -> str:
    return f"{fmt}+clue" if with_clue else f"{fmt}-noclue"


def run_hash(config: ExperimentConfig, fmt: str, with_clue: bool, seed: int) -> str:
    payload = {
        "data": config.data,
        "synth": config.synth if config.input_kind == "speech" else {},
        "model": config.model,
        "train": config.train,
        "eval": config.eval,
        "input_kind": config.input_kind,
        "format": fmt,
        "with_clue": with_clue,
        "seed": seed,
    }
    return stable_hash_hex(canonical_json(payload))


def evaluate_model(
    model: SpeechToStructure,
    vocab: Vocabulary,
    schema: Schema,
    instances: Sequence[Instance],
    fmt: str,
    max_len: int,
) -> tuple[MetricReport, dict]:
    preds = predict_instances(model, vocab, schema, instances, fmt, max_len)
    report = score_corpus(
        {iid: p["records"] for iid, p in preds.items()},
        {inst.id: list(inst.events) for inst in instances},
    )
    n = max(len(instances), 1)
    extras = {
        "ill_formed_rate": sum(p["diagnostics"].recovered for p in preds.values()) / n,
        "missing_separator_rate": sum(p["missing_separator"] for p in preds.values()) / n,
        "max_tokens": max((p["n_tokens"] for p in preds.values()), default=0),
        "mean_tokens": float(np.mean([p["n_tokens"] for p in preds.values()])) if preds else 0.0,
    }
    return report, extras


def run_single(config: ExperimentConfig, fmt: str, with_clue: bool, seed: int) -> dict:
    """Train and evaluate one (condition, seed); returns the run report dict.

    Skipped (previous report returned as-is) when the run directory already
    holds a report with the same content hash.
    """
    run_dir = Path(config.out_dir) / "runs" / condition_name(fmt, with_clue) / f"seed{seed}"
    report_path = run_dir / "report.json"
    h = run_hash(config, fmt, with_clue, seed)
    if report_path.exists():
        previous = read_json(report_path)
        if previous.get("config_hash") == h:
            return previous
    run_dir.mkdir(parents=True, exist_ok=True)
    train_set, dev, test, schema = prepare_data(config)
    vocab = build_vocabulary(train_set + dev + test)
    model_cfg = ModelConfig(
        vocab_size=len(vocab),
        d_model=int(config.model.get("d_model", 64)),
        n_heads=int(config.model.get("n_heads", 4)),
        n_encoder_layers=int(config.model.get("n_encoder_layers", 2)),
        n_decoder_layers=int(config.model.get("n_decoder_layers", 2)),
        d_ff=int(config.model.get("d_ff", 256)),
        input_kind=config.input_kind,
        seed=seed,
    )
    train_cfg = TrainConfig(
        epochs=int(config.train.get("epochs", 20)),
        batch_size=int(config.train.get("batch_size", 16)),
        lr=float(config.train.get("lr", 3e-3)),
        warmup_ratio=float(config.train.get("warmup_ratio", 0.2)),
        weight_decay=float(config.train.get("weight_decay", 0.01)),
        schedule=config.train.get("schedule", "linear"),
        max_grad_norm=(
            float(config.train["max_grad_norm"])
            if config.train.get("max_grad_norm") is not None
            else 1.0
        ),
        seed=seed,
        max_gen_len=config.max_len,
        eval_every=int(config.train.get("eval_every", 1)),
        patience=(
            int(config.train["patience"]) if config.train.get("patience") is not None else None
        ),
        freeze_encoder=bool(config.train.get("freeze_encoder", False)),
    )
    model = SpeechToStructure(model_cfg)
    result = train(model, vocab, schema, train_set, dev, fmt, with_clue, train_cfg)
    report, extras = evaluate_model(model, vocab, schema, test, fmt, config.max_len)
    save_checkpoint(run_dir / "checkpoint", model, vocab, fmt, with_clue)
    save_schema(schema, run_dir / "schema.json")
    _write_history_csv(run_dir / "history.csv", result.history)
    run_report = {
        "condition": condition_name(fmt, with_clue),
        "format": fmt,
        "with_clue": with_clue,
        "seed": seed,
        "config_hash": h,
        "best_dev_trig_c_f1": result.best_dev_f1,
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history),
        "test": report.to_dict(),
        **extras,
    }
    write_json(report_path, run_report)
    return run_report


def _write_history_csv(path, history: list[dict]) -> None:
    keys = ["epoch", "train_loss", "per_token_nll", "dev_trig_c_f1"]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(keys)
        for row in history:
            writer.writerow([row.get(k, "") for k in keys])


def _run_single_entry(args) -> dict:
    config_dict, fmt, with_clue, seed = args
    return run_single(ExperimentConfig.from_dict(config_dict), fmt, with_clue, seed)


# ------------------------------------------------------------------ the grid


@dataclass
class AblationReport:
    config: ExperimentConfig
    rows: list[dict]

    @property
    def any_failed(self) -> bool:
        return any(row.get("failed") for row in self.rows)

    def row(self, condition: str) -> dict:
        for row in self.rows:
            if row["condition"] == condition:
                return row
        raise KeyError(condition)

    def to_dict(self) -> dict:
        return {"name": self.config.name, "conditions": self.rows}


def _aggregate(condition: str, fmt: str, with_clue: bool, runs: list[dict]) -> dict:
    per_seed = {}
    for run in runs:
        metrics = {
            name: m for name, m in run["test"]["metrics"].items()
        }
        per_seed[str(run["seed"])] = {
            "metrics": metrics,
            "ill_formed_rate": run["ill_formed_rate"],
            "missing_separator_rate": run["missing_separator_rate"],
            "best_dev_trig_c_f1": run["best_dev_trig_c_f1"],
            "epochs_run": run["epochs_run"],
        }
    mean, std = {}, {}
    for kind in MetricKind:
        f1s = [run["test"]["metrics"][kind.value]["f1"] for run in runs]
        recalls = [run["test"]["metrics"][kind.value]["r"] for run in runs]
        precisions = [run["test"]["metrics"][kind.value]["p"] for run in runs]
        mean[kind.value] = {
            "f1": float(np.mean(f1s)),
            "r": float(np.mean(recalls)),
            "p": float(np.mean(precisions)),
        }
        std[kind.value] = {"f1": float(np.std(f1s))}
    return {
        "condition": condition,
        "format": fmt,
        "with_clue": with_clue,
        "failed": False,
        "per_seed": per_seed,
        "mean": mean,
        "std": std,
        "ill_formed_rate_mean": float(np.mean([r["ill_formed_rate"] for r in runs])),
    }


def run_experiment(config: ExperimentConfig) -> AblationReport:
    """Train/evaluate every (format, clue) condition x seed; aggregate."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(config.to_toml(), encoding="utf-8")
    jobs = [
        (fmt, clue, seed)
        for fmt in config.formats
        for clue in config.clues
        for seed in config.seeds
    ]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    results: dict[tuple[str, bool, int], dict] = {}
    if workers > 1:
        payload = config.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (fmt, clue, seed), run in zip(
                jobs, pool.map(_run_single_entry, [(payload, f, c, s) for f, c, s in jobs])
            ):
                results[(fmt, clue, seed)] = run
    else:
        for fmt, clue, seed in jobs:
            try:
                results[(fmt, clue, seed)] = run_single(config, fmt, clue, seed)
            except Exception as exc:  # noqa: BLE001 - isolate per condition
                results[(fmt, clue, seed)] = {
                    "condition": condition_name(fmt, clue),
                    "format": fmt,
                    "with_clue": clue,
                    "seed": seed,
                    "failed": True,
                    "error": str(exc),
                }
    rows = []
    for fmt in config.formats:
        for clue in config.clues:
            runs = [results[(fmt, clue, s)] for s in config.seeds]
            failed = [r for r in runs if r.get("failed")]
            if failed:
                rows.append(
                    {
                        "condition": condition_name(fmt, clue),
                        "format": fmt,
                        "with_clue": clue,
                        "failed": True,
                        "errors": [r.get("error", "") for r in failed],
                    }
                )
            else:
                rows.append(_aggregate(condition_name(fmt, clue), fmt, clue, runs))
    report = AblationReport(config=config, rows=rows)
    write_json(out / "report.json", report.to_dict())
    _write_raw_scores_csv(out / "raw_scores.csv", [r for r in results.values()])
    return report


def _write_raw_scores_csv(path, runs: list[dict]) -> None:
    cols = ["condition", "seed", "failed"] + [f"{k.value}_f1" for k in MetricKind] + [
        "ill_formed_rate",
        "best_dev_trig_c_f1",
        "epochs_run",
    ]
    runs = sorted(runs, key=lambda r: (r["condition"], r.get("seed", -1)))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for run in runs:
            if run.get("failed"):
                writer.writerow([run["condition"], run.get("seed", ""), True] + [""] * (len(cols) - 3))
                continue
            row = [run["condition"], run["seed"], False]
            row += [run["test"]["metrics"][k.value]["f1"] for k in MetricKind]
            row += [run["ill_formed_rate"], run["best_dev_trig_c_f1"], run["epochs_run"]]
            writer.writerow(row)


# ------------------------------------------------------------------ length


def ablate_length(
    ckpt_dir,
    config: ExperimentConfig,
    grid: Sequence[int],
    out_dir=None,
) -> list[dict]:
    """Inference-only sweep over the generation length cap; no retraining."""
    model, vocab, fmt, _with_clue = load_checkpoint(ckpt_dir)
    _train, _dev, test, schema = prepare_data(config)
    rows = []
    for max_len in grid:
        report, extras = evaluate_model(model, vocab, schema, test, fmt, int(max_len))
        if extras["max_tokens"] > int(max_len):
            raise AssertionError(
                f"generation exceeded cap: {extras['max_tokens']} > {max_len}"
            )
        rows.append({"max_len": int(max_len), "test": report.to_dict(), **extras})
    if out_dir is not None:
        out = Path(out_dir)
        (out / "curves").mkdir(parents=True, exist_ok=True)
        _write_length_csv(out / "curves" / "length_ablation.csv", rows)
        _plot_length_curve(out / "charts" / "length_ablation.svg", rows)
        write_json(out / "length_ablation.json", {"format": fmt, "points": rows})
    return rows


def _write_length_csv(path, rows: list[dict]) -> None:
    cols = ["max_len"]
    for kind in MetricKind:
        cols += [f"{kind.value}_p", f"{kind.value}_r", f"{kind.value}_f1"]
    cols += ["ill_formed_rate", "mean_tokens", "max_tokens"]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for row in rows:
            out = [row["max_len"]]
            for kind in MetricKind:
                m = row["test"]["metrics"][kind.value]
                out += [m["p"], m["r"], m["f1"]]
            out += [row["ill_formed_rate"], row["mean_tokens"], row["max_tokens"]]
            writer.writerow(out)


def _chart_setup():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "speechee"
    import matplotlib.pyplot as plt

    return plt


def _plot_length_curve(path, rows: list[dict]) -> None:
    plt = _chart_setup()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    xs = [row["max_len"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for kind in (MetricKind.TRIG_C, MetricKind.ARG_C):
        ax.plot(xs, [row["test"]["metrics"][kind.value]["f1"] for row in rows], marker="o",
                label=f"{kind.value} F1")
    ax.plot(xs, [row["test"]["metrics"][MetricKind.TRIG_C.value]["r"] for row in rows],
            marker="s", linestyle="--", label="trig-c recall")
    ax.set_xlabel("output length cap (tokens)")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# ------------------------------------------------------------------ formats


def compare_formats(config: ExperimentConfig) -> AblationReport:
    """Matched tree-vs-flat grid plus the per-format bar chart."""
    if set(config.formats) != {"tree", "flat"}:
        config = ExperimentConfig.from_dict({**config.to_dict(), "formats": ["tree", "flat"]})
    report = run_experiment(config)
    _plot_format_bars(Path(config.out_dir) / "charts" / "format_comparison.svg", report)
    return report


def _plot_format_bars(path, report: AblationReport) -> None:
    plt = _chart_setup()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    rows = [r for r in report.rows if not r.get("failed")]
    kinds = [MetricKind.TRIG_I, MetricKind.EVENT_TYPE_I, MetricKind.TRIG_C]
    x = np.arange(len(kinds))
    width = 0.8 / max(len(rows), 1)
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    for i, row in enumerate(rows):
        ys = [row["mean"][k.value]["f1"] for k in kinds]
        ax.bar(x + i * width, ys, width, label=row["condition"])
    ax.set_xticks(x + width * (len(rows) - 1) / 2)
    ax.set_xticklabels([k.value for k in kinds])
    ax.set_ylabel("micro-F1")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
