"""Command-line entry points for the curation pipeline and tokenizer lab."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .classifier import NgramTextClassifier, evaluate, read_labeled_file
from .corpus_io import read_jsonl_path, write_jsonl_path
from .dedup import MinHashParams, dedup_stage
from .langid import CharNgramLanguageId, train_langid
from .mcq import read_mcq_jsonl, shuffle_mcq, write_mcq_jsonl
from .pipeline import PipelineConfig, PipelineConfigError, PRESETS, expand_paths, run_pipeline
from .stats import StageStats
from .tokenizer import (
    BpeTokenizer,
    MixtureMode,
    MixtureSpec,
    build_mixture,
    fertility,
)

DATA_ROOT_ENV = "ARCORPUS_DATA"


def _resolve(path: str) -> str:
    """Relative paths resolve against $ARCORPUS_DATA when it is set."""
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not Path(path).is_absolute():
        return str(Path(root) / path)
    return path


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def cmd_run(args) -> int:
    cfg = PipelineConfig.from_file(_resolve(args.config))
    if args.preset:
        if args.preset not in PRESETS:
            raise PipelineConfigError(f"unknown preset {args.preset!r}")
        stages = list(PRESETS[args.preset])
        if cfg.input_format != "warc" and "extract" in stages:
            stages.remove("extract")
        cfg.stages = stages
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.input:
        cfg.input_paths = expand_paths([_resolve(p) for p in args.input])
    if args.output:
        cfg.output_path = _resolve(args.output)
    stats = run_pipeline(cfg)
    print(stats.funnel_table())
    print(f"\ncumulative retention: {stats.cumulative_retention_pct():.2f}%")
    return 0


def cmd_stats(args) -> int:
    with open(_resolve(args.input), encoding="utf-8") as fh:
        payload = json.load(fh)
    stats = StageStats()
    for name, raw in payload.get("stages", {}).items():
        count = stats.stage(name)
        count.input_docs = raw["input_docs"]
        count.kept = raw["kept"]
        count.dropped = raw["dropped"]
        count.input_words = raw.get("input_words", 0)
        count.kept_words = raw.get("kept_words", 0)
        count.drop_reasons.update(raw.get("drop_reasons", {}))
    print(stats.funnel_table())
    return 0


def cmd_train_langid(args) -> int:
    corpora = {}
    for spec in args.corpus:
        lang, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--corpus expects lang=path, got {spec!r}")
        corpora[lang] = _read_lines(_resolve(path))
    model = train_langid(corpora, order=args.order, alpha=args.alpha)
    model.save(_resolve(args.output))
    print(f"trained languages {model.languages_} -> {args.output}")
    return 0


def cmd_train_classifier(args) -> int:
    data = list(read_labeled_file(_resolve(args.input)))
    clf = NgramTextClassifier(
        word_ngram_max=args.word_ngrams,
        embed_dim=args.dim,
        epochs=args.epochs,
        learning_rate=args.lr,
        bucket_count=args.buckets,
        seed=args.seed,
    )
    clf.fit([t for t, _ in data], [l for _, l in data])
    clf.save(_resolve(args.output))
    print(f"trained labels {clf.labels_} on {len(data)} examples -> {args.output}")
    if args.eval:
        report = evaluate(clf, read_labeled_file(_resolve(args.eval)))
        print(f"held-out: Acc(%) {report['accuracy_pct']:.2f}  F1(%) {report['macro_f1_pct']:.2f}")
    return 0


def cmd_train_tokenizer(args) -> int:
    corpus: list[str] = []
    for path in args.input:
        corpus.extend(_read_lines(_resolve(path)))
    tok = BpeTokenizer(pre=args.pre, vocab_size=args.vocab_size).fit(corpus)
    tok.save(_resolve(args.output))
    print(f"vocab size {tok.vocab_size_} ({len(tok.merges_)} merges) -> {args.output}")
    return 0


def cmd_fertility(args) -> int:
    tok = BpeTokenizer.load(_resolve(args.tokenizer))
    corpus = {}
    for spec in args.input:
        domain, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--input expects domain=path, got {spec!r}")
        corpus[domain] = _read_lines(_resolve(path))
    report = fertility(corpus, tok)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_mixture(args) -> int:
    sources = {}
    weights = []
    for spec in args.source:
        name, _, rest = spec.partition("=")
        weight_str, _, path = rest.partition(":")
        if not path:
            raise SystemExit(f"--source expects name=weight:path, got {spec!r}")
        sources[name] = _read_lines(_resolve(path))
        weights.append((name, float(weight_str)))
    spec = MixtureSpec(
        sources=tuple(weights),
        mode=MixtureMode(args.mode),
        reweight_sources=frozenset(args.reweight) if args.reweight else None,
    )
    docs = list(build_mixture(sources, spec, seed=args.seed, total=args.total))
    with open(_resolve(args.output), "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(doc + "\n")
    print(f"wrote {len(docs)} documents -> {args.output}")
    return 0


def cmd_shuffle_mcq(args) -> int:
    items = list(read_mcq_jsonl(_resolve(args.input)))
    datasets = shuffle_mcq(items, num_shuffles=args.num_shuffles, seed=args.seed)
    out_dir = Path(_resolve(args.output_dir))
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, dataset in enumerate(datasets):
        path = out_dir / f"shuffle_{i}.jsonl"
        write_mcq_jsonl(dataset, path)
    print(f"wrote {len(datasets)} datasets (1 identity + {len(datasets) - 1} shuffled) -> {out_dir}")
    return 0


def cmd_dedup(args) -> int:
    params = MinHashParams(
        shingle_size=args.shingle_size,
        num_perms=args.num_perms,
        bands=args.bands,
        rows=args.rows,
        seed=args.seed,
    )
    docs = read_jsonl_path(_resolve(args.input))
    kept, stats = dedup_stage(docs, params)
    write_jsonl_path(kept, _resolve(args.output))
    print(stats.funnel_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arcorpus",
        description="Curate web-crawl archives into a filtered Arabic corpus "
        "and measure tokenizer design choices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured pipeline")
    run.add_argument("--config", required=True)
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--input", nargs="*")
    run.add_argument("--output")
    run.set_defaults(func=cmd_run)

    stats = sub.add_parser("stats", help="render a saved stats file as a funnel table")
    stats.add_argument("--input", required=True)
    stats.set_defaults(func=cmd_stats)

    tl = sub.add_parser("train-langid", help="train the language detector")
    tl.add_argument("--corpus", action="append", required=True, metavar="LANG=PATH")
    tl.add_argument("--order", type=int, default=3)
    tl.add_argument("--alpha", type=float, default=0.01)
    tl.add_argument("--output", required=True)
    tl.set_defaults(func=cmd_train_langid)

    tc = sub.add_parser("train-classifier", help="train the quality classifier")
    tc.add_argument("--input", required=True, help="__label__<name> text per line")
    tc.add_argument("--eval", help="optional held-out file in the same format")
    tc.add_argument("--word-ngrams", type=int, default=3)
    tc.add_argument("--dim", type=int, default=64)
    tc.add_argument("--epochs", type=int, default=10)
    tc.add_argument("--lr", type=float, default=0.1)
    tc.add_argument("--buckets", type=int, default=1 << 21)
    tc.add_argument("--seed", type=int, default=0)
    tc.add_argument("--output", required=True)
    tc.set_defaults(func=cmd_train_classifier)

    tt = sub.add_parser("train-tokenizer", help="train a BPE tokenizer")
    tt.add_argument("--input", nargs="+", required=True)
    tt.add_argument("--pre", default="byte_level",
                    choices=["whitespace", "byte_level", "gpt4_split", "punct_split"])
    tt.add_argument("--vocab-size", type=int, default=32_000)
    tt.add_argument("--output", required=True)
    tt.set_defaults(func=cmd_train_tokenizer)

    fe = sub.add_parser("fertility", help="tokens per word on held-out domains")
    fe.add_argument("--tokenizer", required=True)
    fe.add_argument("--input", action="append", required=True, metavar="DOMAIN=PATH")
    fe.set_defaults(func=cmd_fertility)

    mx = sub.add_parser("mixture", help="sample a weighted training mixture")
    mx.add_argument("--source", action="append", required=True, metavar="NAME=WEIGHT:PATH")
    mx.add_argument("--mode", default="original", choices=["original", "reweighted"])
    mx.add_argument("--reweight", nargs="*", help="source names to reweight (default: all)")
    mx.add_argument("--total", type=int)
    mx.add_argument("--seed", type=int, default=0)
    mx.add_argument("--output", required=True)
    mx.set_defaults(func=cmd_mixture)

    sm = sub.add_parser("shuffle-mcq", help="emit identity + permuted MCQ datasets")
    sm.add_argument("--input", required=True)
    sm.add_argument("--num-shuffles", type=int, default=2)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--output-dir", required=True)
    sm.set_defaults(func=cmd_shuffle_mcq)

    de = sub.add_parser("dedup", help="near-duplicate removal over a JSONL store")
    de.add_argument("--input", required=True)
    de.add_argument("--output", required=True)
    de.add_argument("--shingle-size", type=int, default=5)
    de.add_argument("--num-perms", type=int, default=112)
    de.add_argument("--bands", type=int, default=14)
    de.add_argument("--rows", type=int, default=8)
    de.add_argument("--seed", type=int, default=0)
    de.set_defaults(func=cmd_dedup)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
