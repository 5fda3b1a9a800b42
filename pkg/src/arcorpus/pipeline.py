"""Declarative stage orchestration with per-stage funnel statistics.

A pipeline streams documents through an ordered stage list; per-document
stages may run on a worker pool (input order is preserved, so outputs are
identical for any worker count), while near-duplicate removal is a barrier
that needs the whole surviving corpus.

Ablation presets:
  raw      extract (+ language filtering)
  partial  raw + url + c4
  full     partial + gopher quality + fineweb + gopher repetition
  dedup    full + near-duplicate removal
"""

from __future__ import annotations

import glob
import gzip
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import classifier as classifier_mod
from . import dedup as dedup_mod
from . import langid as langid_mod
from .corpus_io import (
    Decision,
    Document,
    RecordType,
    SourceStage,
    StageAnnotation,
    document_id,
    read_jsonl,
    read_warc,
    read_wet,
    write_jsonl,
)
from .extract import ExtractionConfig, extract_text
from .filters import (
    FilterConfig,
    c4_filter,
    fineweb_quality_filter,
    gopher_quality_filter,
    gopher_repetition_filter,
    url_filter,
)
from .stats import StageStats


class PipelineConfigError(ValueError):
    pass


PRESETS = {
    "raw": ["extract", "langid"],
    "partial": ["extract", "langid", "url", "c4"],
    "full": ["extract", "langid", "url", "c4", "gopher_quality", "fineweb", "gopher_repetition"],
    "dedup": [
        "extract",
        "langid",
        "url",
        "c4",
        "gopher_quality",
        "fineweb",
        "gopher_repetition",
        "dedup",
    ],
}

KNOWN_STAGES = (
    "extract",
    "langid",
    "url",
    "c4",
    "gopher_quality",
    "fineweb",
    "gopher_repetition",
    "dedup",
    "quality_classifier",
    "edu_classifier",
)

INPUT_FORMATS = ("warc", "wet", "jsonl")


@dataclass
class PipelineConfig:
    input_paths: list[str]
    input_format: str
    output_path: str
    stages: list[str]
    seed: int = 0
    workers: int = 1
    stats_path: str | None = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    langid_model_path: str | None = None
    langid_min_conf: float = 0.65
    minhash: dedup_mod.MinHashParams = field(default_factory=dedup_mod.MinHashParams)
    quality_model_path: str | None = None
    quality_keep_label: str = "high"
    quality_min_prob: float = 0.5
    edu_model_path: str | None = None
    edu_score_annotation: str = "edu_score"
    edu_threshold: int = 2

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "PipelineConfig":
        base = Path(base_dir) if base_dir else Path.cwd()

        def resolve(p):
            return str(p) if Path(p).is_absolute() else str(base / p)

        inp = raw.get("input", {})
        out = raw.get("output", {})
        if "preset" in raw and "stages" in raw:
            raise PipelineConfigError("give either a preset or an explicit stage list, not both")
        if "preset" in raw:
            preset = raw["preset"]
            if preset not in PRESETS:
                raise PipelineConfigError(
                    f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}"
                )
            stages = list(PRESETS[preset])
        else:
            stages = list(raw.get("stages", []))
        fmt = inp.get("format", "jsonl")
        if fmt != "warc" and "extract" in stages:
            stages.remove("extract")  # extraction only applies to raw archives

        cfg = cls(
            input_paths=[resolve(p) for p in inp.get("paths", [])],
            input_format=fmt,
            output_path=resolve(out["path"]) if "path" in out else "",
            stages=stages,
            seed=int(raw.get("seed", 0)),
            workers=int(raw.get("workers", 1)),
            stats_path=resolve(raw["stats"]) if "stats" in raw else None,
            filters=FilterConfig.from_dict(raw.get("filters", {})),
        )
        lang = raw.get("langid", {})
        if "model" in lang:
            cfg.langid_model_path = resolve(lang["model"])
        cfg.langid_min_conf = float(lang.get("min_conf", 0.65))
        if "dedup" in raw:
            cfg.minhash = dedup_mod.MinHashParams(**raw["dedup"])
        if cfg.minhash.seed == 0 and cfg.seed:
            cfg.minhash = dedup_mod.MinHashParams(
                shingle_size=cfg.minhash.shingle_size,
                num_perms=cfg.minhash.num_perms,
                bands=cfg.minhash.bands,
                rows=cfg.minhash.rows,
                jaccard_threshold=cfg.minhash.jaccard_threshold,
                seed=cfg.seed,
            )
        qc = raw.get("quality_classifier", {})
        if "model" in qc:
            cfg.quality_model_path = resolve(qc["model"])
            cfg.quality_keep_label = qc.get("keep_label", "high")
            cfg.quality_min_prob = float(qc.get("min_prob", 0.5))
        edu = raw.get("edu_classifier", {})
        if edu:
            if "model" in edu:
                cfg.edu_model_path = resolve(edu["model"])
            cfg.edu_score_annotation = edu.get("score_annotation", "edu_score")
            cfg.edu_threshold = int(edu.get("threshold", 2))
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        return cls.from_dict(raw, base_dir=path.parent)

    def validate(self) -> None:
        """Fail before any processing on missing inputs, models, or bad stages."""
        if self.input_format not in INPUT_FORMATS:
            raise PipelineConfigError(f"unknown input format {self.input_format!r}")
        if not self.input_paths:
            raise PipelineConfigError("no input paths configured")
        for path in self.input_paths:
            if not Path(path).exists():
                raise PipelineConfigError(f"input file does not exist: {path}")
        if not self.output_path:
            raise PipelineConfigError("no output path configured")
        if len(set(self.stages)) != len(self.stages):
            raise PipelineConfigError("stage names must be unique")
        unknown = [s for s in self.stages if s not in KNOWN_STAGES]
        if unknown:
            raise PipelineConfigError(f"unknown stages: {unknown}")
        if "extract" in self.stages and self.input_format != "warc":
            raise PipelineConfigError("the extract stage requires warc input")
        if "langid" in self.stages:
            if not self.langid_model_path:
                raise PipelineConfigError("the langid stage needs a model file")
            if not Path(self.langid_model_path).exists():
                raise PipelineConfigError(
                    f"langid model does not exist: {self.langid_model_path}"
                )
        if "quality_classifier" in self.stages:
            if not self.quality_model_path or not Path(self.quality_model_path).exists():
                raise PipelineConfigError("the quality_classifier stage needs a model file")
        if "edu_classifier" in self.stages and self.edu_model_path:
            if not Path(self.edu_model_path).exists():
                raise PipelineConfigError(
                    f"edu classifier model does not exist: {self.edu_model_path}"
                )


@dataclass
class _StageContext:
    """Everything the per-document stage chain needs; must pickle cleanly."""

    stages: list[str]
    filters: FilterConfig
    prefilter: langid_mod.ScriptPrefilter
    lang_model: langid_mod.CharNgramLanguageId | None
    langid_min_conf: float
    quality_model: classifier_mod.NgramTextClassifier | None
    quality_keep_label: str
    quality_min_prob: float
    edu_model: classifier_mod.NgramTextClassifier | None
    edu_score_annotation: str
    edu_threshold: int


def _apply_stage(name: str, doc: Document, ctx: _StageContext):
    if name == "langid":
        return doc, langid_mod.language_stage(
            doc, ctx.prefilter, ctx.lang_model, ctx.langid_min_conf, cc_hint=doc.cc_langs
        )
    if name == "url":
        return doc, url_filter(doc, ctx.filters)
    if name == "c4":
        return c4_filter(doc, ctx.filters)
    if name == "gopher_quality":
        return doc, gopher_quality_filter(doc, ctx.filters)
    if name == "fineweb":
        return doc, fineweb_quality_filter(doc, ctx.filters)
    if name == "gopher_repetition":
        return doc, gopher_repetition_filter(doc, ctx.filters)
    if name == "quality_classifier":
        return doc, classifier_mod.quality_stage(
            doc, ctx.quality_model, ctx.quality_keep_label, ctx.quality_min_prob
        )
    if name == "edu_classifier":
        return doc, classifier_mod.edu_stage(
            doc, ctx.edu_model, ctx.edu_score_annotation, ctx.edu_threshold
        )
    raise PipelineConfigError(f"stage {name!r} cannot run in the per-document chain")


def _run_chain(doc: Document, ctx: _StageContext):
    """Apply every per-document stage; returns (surviving doc or None, records)."""
    records = []
    for name in ctx.stages:
        words_in = doc.word_count()
        doc, decision = _apply_stage(name, doc, ctx)
        doc.annotate(decision.to_annotation(name))
        records.append((name, decision.kept, decision.rule, words_in, doc.word_count()))
        if not decision.kept:
            return None, records
    return doc, records


_WORKER_CTX: _StageContext | None = None


def _init_worker(ctx: _StageContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _run_chain_in_worker(doc: Document):
    return _run_chain(doc, _WORKER_CTX)


def _iter_input_documents(cfg: PipelineConfig, stats: StageStats):
    """Yield documents from the configured inputs, running extraction for warc."""
    for path in cfg.input_paths:
        if cfg.input_format == "warc":
            with open(path, "rb") as fh:
                for record in read_warc(fh):
                    if record.record_type is not RecordType.RESPONSE:
                        continue
                    text = extract_text(record.payload, cfg=cfg.extraction)
                    doc = Document(
                        id=document_id(record.target_uri, record.warc_date),
                        url=record.target_uri,
                        text=text,
                        source_stage=SourceStage.WARC_EXTRACTED,
                    )
                    kept = bool(text.strip())
                    if "extract" in cfg.stages:
                        ann_rule = "" if kept else "empty_extraction"
                        doc.annotate(
                            StageAnnotation(
                                stage="extract",
                                decision=Decision.KEPT if kept else Decision.DROPPED,
                                rule=ann_rule,
                                metrics={"chars": float(len(text))},
                            )
                        )
                        stats.record("extract", kept, ann_rule, doc.word_count())
                        if not kept:
                            continue
                    yield doc
        elif cfg.input_format == "wet":
            with open(path, "rb") as fh:
                yield from read_wet(fh)
        else:
            opener = gzip.open if path.endswith(".gz") else open
            with opener(path, "rb") as fh:
                yield from read_jsonl(fh)


def _build_context(cfg: PipelineConfig) -> _StageContext:
    chain = [s for s in cfg.stages if s not in ("extract", "dedup")]
    lang_model = None
    if "langid" in chain:
        lang_model = langid_mod.CharNgramLanguageId.load(cfg.langid_model_path)
    quality_model = None
    if "quality_classifier" in chain:
        quality_model = classifier_mod.NgramTextClassifier.load(cfg.quality_model_path)
    edu_model = None
    if "edu_classifier" in chain and cfg.edu_model_path:
        edu_model = classifier_mod.NgramTextClassifier.load(cfg.edu_model_path)
    return _StageContext(
        stages=chain,
        filters=cfg.filters,
        prefilter=langid_mod.ScriptPrefilter(),
        lang_model=lang_model,
        langid_min_conf=cfg.langid_min_conf,
        quality_model=quality_model,
        quality_keep_label=cfg.quality_keep_label,
        quality_min_prob=cfg.quality_min_prob,
        edu_model=edu_model,
        edu_score_annotation=cfg.edu_score_annotation,
        edu_threshold=cfg.edu_threshold,
    )


def run_pipeline(cfg: PipelineConfig) -> StageStats:
    """Stream documents through the configured stages and write survivors.

    Returns the funnel statistics; also writes them to cfg.stats_path as
    JSON when configured. Succeeds even when every document is dropped.
    """
    cfg.validate()
    stats = StageStats()
    ctx = _build_context(cfg)
    docs = _iter_input_documents(cfg, stats)

    def _account(doc, records):
        for name, kept, rule, words_in, words_out in records:
            stats.record(name, kept, rule, words_in, words_out)
        if doc is not None:
            yield doc

    def survivors():
        if cfg.workers > 1:
            with ProcessPoolExecutor(
                max_workers=cfg.workers, initializer=_init_worker, initargs=(ctx,)
            ) as pool:
                for doc, records in pool.map(_run_chain_in_worker, docs, chunksize=16):
                    yield from _account(doc, records)
        else:
            for doc_in in docs:
                doc, records = _run_chain(doc_in, ctx)
                yield from _account(doc, records)

    stream = survivors()
    if "dedup" in cfg.stages:
        kept_iter, dedup_stats = dedup_mod.dedup_stage(stream, cfg.minhash)
        stats.merge(dedup_stats)
        stream = kept_iter

    out_path = Path(cfg.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    opener = gzip.open if cfg.output_path.endswith(".gz") else open
    with opener(cfg.output_path, "wb") as fh:
        write_jsonl(stream, fh)

    if cfg.stats_path:
        Path(cfg.stats_path).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.stats_path).write_text(stats.to_json() + "\n", encoding="utf-8")
    return stats


def expand_paths(patterns) -> list[str]:
    """Expand globs; literal paths pass through so missing files still fail validation."""
    paths: list[str] = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        paths.extend(matches if matches else [pattern])
    return paths
