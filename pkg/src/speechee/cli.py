"""Command-line entry points.

Each spec-level tool is a console script (codec, score, build-data, train,
infer, pipeline, experiment) and also a subcommand of the umbrella
``speechee`` command.  All commands are batch-oriented: JSONL in, JSONL/JSON
out, deterministic under fixed seeds.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import codec as codec_mod
from .data import (
    filter_empty_events,
    filter_unreadable,
    load_corpus,
    load_schema,
    map_labels,
    map_schema,
    save_schema,
    split_dev_to_test,
    synthesize,
    top_k_types,
    write_dataset,
)
from .harness import ExperimentConfig, ablate_length, compare_formats, run_experiment, run_single
from .metrics import MetricKind, score_corpus
from .pipeline import ExternalAsr, GoldLookupExtractor, NoisyChannelAsr, OracleAsr, run_pipeline
from .schema import LabelMapping
from .synth import ExternalCommandSynthesizer, PseudoSpeechSynthesizer, VoiceConfig
from .util import read_json, write_json, write_jsonl


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# ------------------------------------------------------------------ codec


def codec_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="codec", description="Serialize or parse event records")
    sub = parser.add_subparsers(dest="cmd", required=True)

    ser = sub.add_parser("serialize", help="events JSONL -> linearized sequences")
    ser.add_argument("--format", choices=codec_mod.FORMATS, required=True)
    ser.add_argument("--in", dest="inp", required=True)
    ser.add_argument("--out", required=True)

    par = sub.add_parser("parse", help="linearized sequences -> events JSONL")
    par.add_argument("--format", choices=codec_mod.FORMATS, required=True)
    par.add_argument("--mode", choices=("strict", "recover"), default="recover")
    par.add_argument("--schema", required=True)
    par.add_argument("--in", dest="inp", required=True)
    par.add_argument("--out", required=True)
    par.add_argument("--diagnostics", default=None)

    args = parser.parse_args(argv)
    if args.cmd == "serialize":
        instances = load_corpus(args.inp)
        lines = [codec_mod.serialize(list(inst.events), args.format).text for inst in instances]
        Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        return 0
    schema = load_schema(args.schema)
    records_rows, diag_rows = [], []
    for lineno, line in enumerate(Path(args.inp).read_text(encoding="utf-8").splitlines(), 1):
        try:
            records, diag = codec_mod.parse(line, schema, args.format, args.mode)
        except codec_mod.ParseError as exc:
            _err(f"line {lineno}: {exc}")
            return 1
        records_rows.append({"line": lineno, "events": [r.to_dict() for r in records]})
        diag_rows.append({"line": lineno, **diag.to_dict()})
    write_jsonl(args.out, records_rows)
    if args.diagnostics:
        write_jsonl(args.diagnostics, diag_rows)
    return 0


# ------------------------------------------------------------------ score


def score_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="score", description="Tuple micro-F1 over six metrics")
    parser.add_argument("--pred", required=True)
    parser.add_argument("--gold", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--csv", default=None)
    args = parser.parse_args(argv)
    pred = {i.id: list(i.events) for i in load_corpus(args.pred)}
    gold = {i.id: list(i.events) for i in load_corpus(args.gold)}
    report = score_corpus(pred, gold)
    write_json(args.out, report.to_dict())
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", newline="") as f:
            writer = _csv.writer(f)
            writer.writerow(["metric", "tp", "fp", "fn", "p", "r", "f1"])
            for kind in MetricKind:
                m = report[kind].to_dict()
                writer.writerow([kind.value, m["tp"], m["fp"], m["fn"], m["p"], m["r"], m["f1"]])
    for kind in MetricKind:
        m = report[kind]
        print(f"{kind.value:>14}: P {m.precision:.4f} R {m.recall:.4f} F1 {m.f1:.4f}")
    return 0


# ------------------------------------------------------------------ build-data


def build_data_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="build-data", description="Construct a speech corpus")
    parser.add_argument("--in", dest="inp", required=True)
    parser.add_argument("--schema", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--filter-empty", action="store_true")
    parser.add_argument("--filter-unreadable", action="store_true")
    parser.add_argument("--map-labels", default=None, help="JSON file of type -> word pairs")
    parser.add_argument("--top-types", type=int, default=None)
    parser.add_argument("--split-dev-to-test", type=int, default=None, metavar="SEED")
    parser.add_argument("--adapter", default="pseudo", help="pseudo or external:<command>")
    parser.add_argument("--voices", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--frames-per-char", type=int, default=4)
    parser.add_argument("--noise-scale", type=float, default=0.05)
    parser.add_argument("--subspace-dim", type=int, default=None)
    args = parser.parse_args(argv)

    schema = load_schema(args.schema)
    instances = load_corpus(args.inp, schema)
    if args.filter_unreadable:
        instances = filter_unreadable(instances)
    if args.filter_empty:
        instances = filter_empty_events(instances)
    if args.map_labels:
        mapping = LabelMapping(read_json(args.map_labels))
        instances = map_labels(instances, mapping)
        schema = map_schema(schema, mapping)
    if args.top_types:
        instances = top_k_types(instances, args.top_types)
    if args.split_dev_to_test is not None:
        instances = split_dev_to_test(instances, args.split_dev_to_test)
    meta = {
        "adapter": args.adapter,
        "voices": args.voices,
        "seed": args.seed,
        "frames_per_char": args.frames_per_char,
        "noise_scale": args.noise_scale,
        "subspace_dim": args.subspace_dim,
    }
    if args.adapter == "pseudo":
        adapter = PseudoSpeechSynthesizer(
            frames_per_char=args.frames_per_char,
            noise_scale=args.noise_scale,
            subspace_dim=args.subspace_dim,
        )
    elif args.adapter.startswith("external:"):
        adapter = ExternalCommandSynthesizer(
            args.adapter.split(":", 1)[1], Path(args.out) / "audio"
        )
    else:
        _err(f"unknown adapter {args.adapter!r}")
        return 2
    voices = [VoiceConfig(f"voice{i}", args.seed + i) for i in range(args.voices)]
    instances, failures = synthesize(instances, adapter, voices, seed=args.seed)
    for iid, reason in failures:
        _err(f"synthesis failed for {iid}: {reason}")
    write_dataset(instances, args.out, meta=meta)
    save_schema(schema, Path(args.out) / "schema.json")
    print(f"wrote {len(instances)} instances to {args.out} ({len(failures)} failures)")
    return 0 if not failures else 1


# ------------------------------------------------------------------ train


def _dataset_data_section(data_dir: Path) -> dict:
    section = {"kind": "files", "schema": str(data_dir / "schema.json")}
    for split in ("train", "dev", "test"):
        path = data_dir / f"{split}.jsonl"
        if path.exists():
            section[split] = str(path)
    return section


def _dataset_synth_section(data_dir: Path) -> dict:
    meta_path = data_dir / "dataset_meta.json"
    if not meta_path.exists():
        return {}
    meta = read_json(meta_path)
    return {
        "frames_per_char": meta.get("frames_per_char", 4),
        "noise_scale": meta.get("noise_scale", 0.05),
        "subspace_dim": meta.get("subspace_dim"),
        "voices": meta.get("voices", 1),
        "seed": meta.get("seed", 0),
    }


def train_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="train", description="Train the toy seq2struct model")
    parser.add_argument("--config", required=True, help="experiment-style TOML config")
    parser.add_argument("--data", default=None, help="dataset dir from build-data")
    parser.add_argument("--out", required=True, help="checkpoint directory")
    args = parser.parse_args(argv)
    config = ExperimentConfig.from_toml(args.config)
    overrides: dict = {"out_dir": str(Path(args.out).parent / "_train_runs")}
    if args.data:
        data_dir = Path(args.data)
        overrides["data"] = _dataset_data_section(data_dir)
        synth = _dataset_synth_section(data_dir)
        if synth:
            overrides["synth"] = synth
    config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    fmt = config.formats[0]
    clue = config.clues[0]
    seed = config.seeds[0]
    run = run_single(config, fmt, clue, seed)
    run_dir = Path(config.out_dir) / "runs" / run["condition"] / f"seed{seed}"
    ckpt_src = run_dir / "checkpoint"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("config.json", "params.npz"):
        (out / name).write_bytes((ckpt_src / name).read_bytes())
    print(
        f"trained {run['condition']} seed {seed}: "
        f"dev trig-c {run['best_dev_trig_c_f1']:.4f} "
        f"test trig-c {run['test']['metrics']['trig-c']['f1']:.4f}; checkpoint at {out}"
    )
    return 0


# ------------------------------------------------------------------ infer


def infer_main(argv=None) -> int:
    from .data import load_corpus as _load
    from .model.checkpoint import load_checkpoint
    from .model.training import predict_instances

    parser = argparse.ArgumentParser(prog="infer", description="Run a checkpoint over a corpus")
    parser.add_argument("--ckpt", required=True)
    parser.add_argument("--in", dest="inp", required=True)
    parser.add_argument("--max-len", type=int, default=48)
    parser.add_argument("--out", required=True)
    parser.add_argument("--schema", default=None)
    parser.add_argument("--synth-meta", default=None, help="dataset_meta.json for features")
    args = parser.parse_args(argv)

    model, vocab, fmt, _clue = load_checkpoint(args.ckpt)
    inp = Path(args.inp)
    schema_path = Path(args.schema) if args.schema else inp.parent / "schema.json"
    schema = load_schema(schema_path)
    instances = _load(inp)
    if model.cfg.input_kind == "speech":
        meta_path = Path(args.synth_meta) if args.synth_meta else inp.parent / "dataset_meta.json"
        meta = read_json(meta_path)
        adapter = PseudoSpeechSynthesizer(
            frames_per_char=meta.get("frames_per_char", 4),
            noise_scale=meta.get("noise_scale", 0.05),
            subspace_dim=meta.get("subspace_dim"),
        )
        voices = {v: VoiceConfig(v, meta.get("seed", 0) + i)
                  for i, v in enumerate(f"voice{j}" for j in range(meta.get("voices", 1)))}
        resynth = []
        for inst in instances:
            voice = voices.get(inst.voice or "voice0", VoiceConfig("voice0", meta.get("seed", 0)))
            resynth.append(
                inst.replace(speech=adapter.synth(inst.transcript, voice, meta.get("seed", 0)))
            )
        instances = resynth
    preds = predict_instances(model, vocab, schema, instances, fmt, args.max_len)
    rows = []
    for inst in instances:
        p = preds[inst.id]
        rows.append(
            {
                "id": inst.id,
                "transcript": p["transcript"],
                "events": [r.to_dict() for r in p["records"]],
                "split": inst.split,
                "recovered": p["diagnostics"].recovered,
                "n_tokens": p["n_tokens"],
            }
        )
    write_jsonl(args.out, rows)
    print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


# ------------------------------------------------------------------ pipeline


def pipeline_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pipeline", description="Cascaded ASR + text extraction baseline"
    )
    parser.add_argument("--asr", required=True, help="oracle | cer:<rate> | external:<command>")
    parser.add_argument("--text-ee", required=True, help="toy:<ckpt> | gold | gold:fuzzy")
    parser.add_argument("--data", required=True)
    parser.add_argument("--schema", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    parser.add_argument("--transcripts", default=None)
    parser.add_argument("--max-len", type=int, default=64)
    args = parser.parse_args(argv)

    data_path = Path(args.data)
    corpus = load_corpus(data_path)
    if args.asr == "oracle":
        asr = OracleAsr()
    elif args.asr.startswith("cer:"):
        asr = NoisyChannelAsr(cer=float(args.asr.split(":", 1)[1]), seed=args.seed)
    elif args.asr.startswith("external:"):
        asr = ExternalAsr(args.asr.split(":", 1)[1])
    else:
        _err(f"unknown asr {args.asr!r}")
        return 2
    if args.text_ee == "gold" or args.text_ee.startswith("gold:"):
        fallback = "fuzzy" if args.text_ee.endswith(":fuzzy") else "empty"
        text_ee = GoldLookupExtractor(corpus, fallback=fallback)
    elif args.text_ee.startswith("toy:"):
        from .pipeline import ToySeq2SeqExtractor

        schema_path = Path(args.schema) if args.schema else data_path.parent / "schema.json"
        text_ee = ToySeq2SeqExtractor.from_checkpoint(
            args.text_ee.split(":", 1)[1], load_schema(schema_path), max_len=args.max_len
        )
    else:
        _err(f"unknown text-ee {args.text_ee!r}")
        return 2
    result = run_pipeline(corpus, asr, text_ee)
    write_jsonl(
        args.out,
        (
            {
                "id": inst.id,
                "transcript": result.transcripts[inst.id],
                "events": [r.to_dict() for r in result.predictions[inst.id]],
                "split": inst.split,
            }
            for inst in corpus
        ),
    )
    if args.transcripts:
        write_jsonl(
            args.transcripts,
            ({"id": iid, "transcript": t} for iid, t in sorted(result.transcripts.items())),
        )
    for iid, reason in result.failures:
        _err(f"{iid}: {reason}")
    print(f"pipeline [{asr.name} -> {text_ee.name}] wrote {len(corpus)} predictions")
    return 0


# ------------------------------------------------------------------ experiment


def experiment_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="experiment", description="Reproducible ablation grids")
    sub = parser.add_subparsers(dest="cmd", required=True)

    run_p = sub.add_parser("run", help="train/evaluate the condition grid of a config")
    run_p.add_argument("--config", required=True)

    len_p = sub.add_parser("ablate-length", help="inference-only output-length sweep")
    len_p.add_argument("--ckpt", required=True)
    len_p.add_argument("--config", required=True, help="config providing the test data")
    len_p.add_argument("--grid", required=True, help="comma-separated caps, e.g. 16,32,48")
    len_p.add_argument("--out", default=None)

    fmt_p = sub.add_parser("compare-formats", help="matched tree-vs-flat conditions")
    fmt_p.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.cmd == "run":
        report = run_experiment(ExperimentConfig.from_toml(args.config))
        _print_report(report)
        return 1 if report.any_failed else 0
    if args.cmd == "ablate-length":
        config = ExperimentConfig.from_toml(args.config)
        grid = [int(x) for x in args.grid.split(",")]
        out = args.out or config.out_dir
        rows = ablate_length(args.ckpt, config, grid, out_dir=out)
        for row in rows:
            trig_c = row["test"]["metrics"]["trig-c"]
            print(
                f"max_len {row['max_len']:>4}: trig-c F1 {trig_c['f1']:.4f} "
                f"R {trig_c['r']:.4f} (mean tokens {row['mean_tokens']:.1f})"
            )
        return 0
    report = compare_formats(ExperimentConfig.from_toml(args.config))
    _print_report(report)
    return 1 if report.any_failed else 0


def _print_report(report) -> None:
    for row in report.rows:
        if row.get("failed"):
            print(f"{row['condition']}: FAILED ({row.get('errors')})")
            continue
        trig_c = row["mean"]["trig-c"]["f1"]
        arg_c = row["mean"]["arg-c"]["f1"]
        print(
            f"{row['condition']}: trig-c F1 {trig_c:.4f} arg-c F1 {arg_c:.4f} "
            f"(ill-formed rate {row['ill_formed_rate_mean']:.3f})"
        )


# ------------------------------------------------------------------ umbrella

_SUBCOMMANDS = {
    "codec": codec_main,
    "score": score_main,
    "build-data": build_data_main,
    "train": train_main,
    "infer": infer_main,
    "pipeline": pipeline_main,
    "experiment": experiment_main,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        names = " | ".join(_SUBCOMMANDS)
        print(f"usage: speechee {{{names}}} ...")
        return 0 if argv else 2
    cmd = argv[0]
    if cmd not in _SUBCOMMANDS:
        _err(f"unknown command {cmd!r}")
        return 2
    return _SUBCOMMANDS[cmd](argv[1:])


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
