"""Heuristic quality filters: URL, C4, Gopher quality, FineWeb, Gopher repetition.

Every filter is a pure function Document -> FilterDecision. All statistics
are computed before any threshold is applied, so recorded metrics are
identical whether or not an earlier rule fired; the drop rule is the first
violated threshold in the config's listed order.

Conventions: words are Unicode-whitespace-separated tokens, lines are
newline-separated (blank lines ignored for line statistics), paragraphs are
blank-line-separated blocks.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from urllib.parse import urlsplit

from .corpus_io import Decision, Document, StageAnnotation
from .stats import StageStats

# Terminal punctuation accepted at end of a content line; includes the
# Arabic question mark, the full stop used in Arabic-script Urdu text, and
# closing quote variants.
TERMINAL_PUNCT = ".!?؟۔\"”’»'"
BULLET_CHARS = "•‣▪◦●○·*-–—"
ELLIPSIS_VARIANTS = ("...", "…")


def _load_wordlist(name: str) -> frozenset[str]:
    data = resources.files("arcorpus.data").joinpath(name).read_text("utf-8")
    return frozenset(line.strip() for line in data.splitlines() if line.strip())


def load_wordlist_file(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def default_stopwords() -> frozenset[str]:
    return _load_wordlist("arabic_stopwords.txt")


def default_url_blacklist() -> frozenset[str]:
    return _load_wordlist("url_blacklist.txt")


def default_url_keywords() -> frozenset[str]:
    return _load_wordlist("url_keywords.txt")


@dataclass
class FilterDecision:
    kept: bool
    rule: str = ""
    metrics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.kept and not self.rule:
            raise ValueError("dropped decision must name the rule that fired")
        if self.kept and self.rule:
            raise ValueError("kept decision carries no rule")

    def to_annotation(self, stage: str) -> StageAnnotation:
        return StageAnnotation(
            stage=stage,
            decision=Decision.KEPT if self.kept else Decision.DROPPED,
            rule=self.rule,
            metrics=self.metrics,
        )


@dataclass
class C4Config:
    min_words_per_line: int = 3
    require_terminal_punct: bool = True
    banned_phrases: tuple[str, ...] = ("lorem ipsum", "javascript")
    drop_curly_brace: bool = True


@dataclass
class GopherQualityConfig:
    min_words: int = 50
    max_words: int = 100_000
    mean_word_len_range: tuple[float, float] = (3.0, 10.0)
    max_symbol_word_ratio: float = 0.1
    max_bullet_line_frac: float = 0.9
    max_ellipsis_line_frac: float = 0.3
    min_stopword_hits: int = 2
    stopwords: frozenset[str] = field(default_factory=default_stopwords)


@dataclass
class FinewebConfig:
    max_short_line_frac: float = 0.67
    short_line_len: int = 30
    max_dup_line_char_frac: float = 0.1
    min_line_punct_ratio: float = 0.12
    max_newline_ratio: float = 0.3


@dataclass
class RepetitionConfig:
    max_dup_line_frac: float = 0.30
    max_dup_para_frac: float = 0.30
    max_dup_line_char_frac: float = 0.20
    max_dup_para_char_frac: float = 0.20
    top_ngram_char_frac: tuple[tuple[int, float], ...] = ((2, 0.20), (3, 0.18), (4, 0.16))
    dup_ngram_char_frac: tuple[tuple[int, float], ...] = (
        (5, 0.15),
        (6, 0.14),
        (7, 0.13),
        (8, 0.12),
        (9, 0.11),
        (10, 0.10),
    )


@dataclass
class FilterConfig:
    url_blacklist: frozenset[str] = frozenset()
    url_keyword_blacklist: frozenset[str] = frozenset()
    c4: C4Config = field(default_factory=C4Config)
    gopher_quality: GopherQualityConfig = field(default_factory=GopherQualityConfig)
    fineweb: FinewebConfig = field(default_factory=FinewebConfig)
    repetition: RepetitionConfig = field(default_factory=RepetitionConfig)

    def __post_init__(self):
        for n_list in (self.repetition.top_ngram_char_frac, self.repetition.dup_ngram_char_frac):
            ns = [n for n, _ in n_list]
            if ns != sorted(set(ns)):
                raise ValueError("n-gram threshold lists must be strictly increasing in n")

    @classmethod
    def from_dict(cls, raw: dict) -> "FilterConfig":
        """Build from a parsed config-file section (missing keys keep defaults)."""
        kwargs = {}
        if "url_blacklist" in raw:
            kwargs["url_blacklist"] = frozenset(raw["url_blacklist"])
        if "url_blacklist_file" in raw:
            kwargs["url_blacklist"] = load_wordlist_file(raw["url_blacklist_file"])
        if "url_keyword_blacklist" in raw:
            kwargs["url_keyword_blacklist"] = frozenset(raw["url_keyword_blacklist"])
        if "url_keywords_file" in raw:
            kwargs["url_keyword_blacklist"] = load_wordlist_file(raw["url_keywords_file"])
        if "c4" in raw:
            c4 = dict(raw["c4"])
            if "banned_phrases" in c4:
                c4["banned_phrases"] = tuple(c4["banned_phrases"])
            kwargs["c4"] = C4Config(**c4)
        if "gopher_quality" in raw:
            gq = dict(raw["gopher_quality"])
            if "stopwords_file" in gq:
                gq["stopwords"] = load_wordlist_file(gq.pop("stopwords_file"))
            elif "stopwords" in gq:
                gq["stopwords"] = frozenset(gq["stopwords"])
            if "mean_word_len_range" in gq:
                gq["mean_word_len_range"] = tuple(gq["mean_word_len_range"])
            kwargs["gopher_quality"] = GopherQualityConfig(**gq)
        if "fineweb" in raw:
            kwargs["fineweb"] = FinewebConfig(**raw["fineweb"])
        if "repetition" in raw:
            rep = dict(raw["repetition"])
            for key in ("top_ngram_char_frac", "dup_ngram_char_frac"):
                if key in rep:
                    rep[key] = tuple((int(n), float(f)) for n, f in rep[key])
            kwargs["repetition"] = RepetitionConfig(**rep)
        return cls(**kwargs)


def _lines(text: str) -> list[str]:
    return [ln for ln in (raw.strip() for raw in text.split("\n")) if ln]


def _paragraphs(text: str) -> list[str]:
    return [p for p in (raw.strip() for raw in re.split(r"\n\s*\n", text)) if p]


_EDGE_PUNCT = ".,!?؟;:«»\"'()[]{}”’"


def url_filter(doc: Document, cfg: FilterConfig) -> FilterDecision:
    """Drop documents whose host is blacklisted or whose URL contains a banned keyword."""
    url_lower = doc.url.lower()
    host = ""
    try:
        host = (urlsplit(doc.url).hostname or "").lower()
    except ValueError:
        pass
    domain_hit = 0.0
    if host:
        for dom in cfg.url_blacklist:
            if host == dom or host.endswith("." + dom):
                domain_hit = 1.0
                break
    keyword_hit = 1.0 if any(kw.lower() in url_lower for kw in cfg.url_keyword_blacklist) else 0.0
    metrics = {"url_domain_hit": domain_hit, "url_keyword_hit": keyword_hit}
    if domain_hit:
        return FilterDecision(False, "url_domain", metrics)
    if keyword_hit:
        return FilterDecision(False, "url_keyword", metrics)
    return FilterDecision(True, metrics=metrics)


def _line_passes_c4(line: str, cfg: C4Config) -> bool:
    if len(line.split()) < cfg.min_words_per_line:
        return False
    if cfg.require_terminal_punct and (not line or line[-1] not in TERMINAL_PUNCT):
        return False
    return True


def c4_filter(doc: Document, cfg: FilterConfig) -> tuple[Document, FilterDecision]:
    """Line-level cleanup plus document-level gibberish checks.

    Returns the document with failing lines removed; the decision is made on
    the original text for the phrase and curly-brace rules.
    """
    c4 = cfg.c4
    lower = doc.text.lower()
    lines = _lines(doc.text)
    kept_lines = [ln for ln in lines if _line_passes_c4(ln, c4)]
    banned = next((p for p in c4.banned_phrases if p.lower() in lower), None)
    metrics = {
        "lines_input": float(len(lines)),
        "lines_kept": float(len(kept_lines)),
        "banned_phrase_hit": 1.0 if banned else 0.0,
        "curly_brace_hit": 1.0 if "{" in doc.text else 0.0,
    }
    if banned is not None:
        return doc, FilterDecision(False, "banned_phrase", metrics)
    if c4.drop_curly_brace and "{" in doc.text:
        return doc, FilterDecision(False, "curly_brace", metrics)
    if not kept_lines:
        return doc, FilterDecision(False, "empty_after_line_filter", metrics)
    new_doc = replace(doc, text="\n".join(kept_lines), annotations=dict(doc.annotations))
    return new_doc, FilterDecision(True, metrics=metrics)


def gopher_quality_filter(doc: Document, cfg: FilterConfig) -> FilterDecision:
    gq = cfg.gopher_quality
    text = doc.text
    words = text.split()
    lines = _lines(text)
    word_count = len(words)
    mean_word_len = sum(len(w) for w in words) / word_count if words else 0.0
    symbol_count = text.count("#") + text.count("…") + text.count("...")
    symbol_ratio = symbol_count / word_count if words else 0.0
    bullet_frac = (
        sum(1 for ln in lines if ln[0] in BULLET_CHARS) / len(lines) if lines else 0.0
    )
    ellipsis_frac = (
        sum(1 for ln in lines if ln.endswith(ELLIPSIS_VARIANTS)) / len(lines)
        if lines
        else 0.0
    )
    stopword_hits = sum(1 for w in words if w.strip(_EDGE_PUNCT) in gq.stopwords)
    metrics = {
        "word_count": float(word_count),
        "mean_word_len": mean_word_len,
        "symbol_word_ratio": symbol_ratio,
        "bullet_line_frac": bullet_frac,
        "ellipsis_line_frac": ellipsis_frac,
        "stopword_hits": float(stopword_hits),
    }
    if word_count < gq.min_words:
        return FilterDecision(False, "min_words", metrics)
    if word_count > gq.max_words:
        return FilterDecision(False, "max_words", metrics)
    lo, hi = gq.mean_word_len_range
    if mean_word_len < lo or mean_word_len > hi:
        return FilterDecision(False, "mean_word_len", metrics)
    if symbol_ratio > gq.max_symbol_word_ratio:
        return FilterDecision(False, "symbol_word_ratio", metrics)
    if bullet_frac > gq.max_bullet_line_frac:
        return FilterDecision(False, "bullet_line_frac", metrics)
    if ellipsis_frac > gq.max_ellipsis_line_frac:
        return FilterDecision(False, "ellipsis_line_frac", metrics)
    if stopword_hits < gq.min_stopword_hits:
        return FilterDecision(False, "stopword_hits", metrics)
    return FilterDecision(True, metrics=metrics)


def _dup_fractions(units: list[str]) -> tuple[float, float]:
    """(fraction of repeat occurrences, char fraction of repeat occurrences).

    An occurrence beyond the first of an identical unit counts as a repeat;
    char mass is measured against the total characters of all units.
    """
    if not units:
        return 0.0, 0.0
    counts = Counter(units)
    total_chars = sum(len(u) for u in units)
    dup_count = sum(c - 1 for c in counts.values() if c > 1)
    dup_chars = sum(len(u) * (c - 1) for u, c in counts.items() if c > 1)
    return dup_count / len(units), (dup_chars / total_chars if total_chars else 0.0)


def _top_ngram_char_frac(words: list[str], n: int, text_len: int) -> float:
    """Character share of the most frequent word n-gram (sliding window)."""
    if len(words) < n or text_len == 0:
        return 0.0
    counts = Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))
    gram, freq = max(counts.items(), key=lambda kv: (kv[1], -len(" ".join(kv[0]))))
    if freq < 2:
        return 0.0
    return freq * len(" ".join(gram)) / text_len


def _dup_ngram_char_frac(words: list[str], n: int, text_len: int) -> float:
    """Character share of words covered by any n-gram occurring at least twice."""
    if len(words) < n or text_len == 0:
        return 0.0
    counts = Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))
    covered = [False] * len(words)
    for i in range(len(words) - n + 1):
        if counts[tuple(words[i : i + n])] >= 2:
            for j in range(i, i + n):
                covered[j] = True
    dup_chars = sum(len(w) for w, c in zip(words, covered) if c)
    return dup_chars / text_len


def fineweb_quality_filter(doc: Document, cfg: FilterConfig) -> FilterDecision:
    fw = cfg.fineweb
    text = doc.text
    lines = _lines(text)
    words = text.split()
    short_frac = (
        sum(1 for ln in lines if len(ln) < fw.short_line_len) / len(lines) if lines else 0.0
    )
    _, dup_line_char_frac = _dup_fractions(lines)
    punct_ratio = (
        sum(1 for ln in lines if ln[-1] in TERMINAL_PUNCT) / len(lines) if lines else 0.0
    )
    newline_ratio = text.count("\n") / len(words) if words else 0.0
    metrics = {
        "short_line_frac": short_frac,
        "dup_line_char_frac": dup_line_char_frac,
        "line_punct_ratio": punct_ratio,
        "newline_ratio": newline_ratio,
    }
    if short_frac > fw.max_short_line_frac:
        return FilterDecision(False, "short_line_frac", metrics)
    if dup_line_char_frac > fw.max_dup_line_char_frac:
        return FilterDecision(False, "dup_line_char_frac", metrics)
    if punct_ratio < fw.min_line_punct_ratio:
        return FilterDecision(False, "line_punct_ratio", metrics)
    if newline_ratio > fw.max_newline_ratio:
        return FilterDecision(False, "newline_ratio", metrics)
    return FilterDecision(True, metrics=metrics)


def gopher_repetition_filter(doc: Document, cfg: FilterConfig) -> FilterDecision:
    rep = cfg.repetition
    text = doc.text
    words = text.split()
    text_len = len(text)
    dup_line_frac, dup_line_char_frac = _dup_fractions(_lines(text))
    dup_para_frac, dup_para_char_frac = _dup_fractions(_paragraphs(text))
    metrics = {
        "dup_line_frac": dup_line_frac,
        "dup_para_frac": dup_para_frac,
        "dup_line_char_frac": dup_line_char_frac,
        "dup_para_char_frac": dup_para_char_frac,
    }
    for n, _ in rep.top_ngram_char_frac:
        metrics[f"top_{n}gram_char_frac"] = _top_ngram_char_frac(words, n, text_len)
    for n, _ in rep.dup_ngram_char_frac:
        metrics[f"dup_{n}gram_char_frac"] = _dup_ngram_char_frac(words, n, text_len)

    if dup_line_frac > rep.max_dup_line_frac:
        return FilterDecision(False, "dup_line_frac", metrics)
    if dup_para_frac > rep.max_dup_para_frac:
        return FilterDecision(False, "dup_para_frac", metrics)
    if dup_line_char_frac > rep.max_dup_line_char_frac:
        return FilterDecision(False, "dup_line_char_frac", metrics)
    if dup_para_char_frac > rep.max_dup_para_char_frac:
        return FilterDecision(False, "dup_para_char_frac", metrics)
    for n, threshold in rep.top_ngram_char_frac:
        if metrics[f"top_{n}gram_char_frac"] > threshold:
            return FilterDecision(False, f"top_{n}gram", metrics)
    for n, threshold in rep.dup_ngram_char_frac:
        if metrics[f"dup_{n}gram_char_frac"] > threshold:
            return FilterDecision(False, f"dup_{n}gram", metrics)
    return FilterDecision(True, metrics=metrics)


class StageSet(Enum):
    PARTIALLY_FILTERED = "partial"
    FULLY_FILTERED = "full"


def run_stage_suite(docs, stage_set: StageSet, cfg: FilterConfig):
    """Apply the heuristic filter chain (language filtering happens upstream).

    Returns (iterator of surviving documents, StageStats); the stats object
    is filled in as the iterator is consumed.
    """
    stats = StageStats()

    def pipeline():
        for doc in docs:
            kept_doc = _apply_heuristic_chain(doc, stage_set, cfg, stats)
            if kept_doc is not None:
                yield kept_doc

    return pipeline(), stats


def _apply_heuristic_chain(
    doc: Document, stage_set: StageSet, cfg: FilterConfig, stats: StageStats
) -> Document | None:
    chain = [("url", url_filter), ("c4", c4_filter)]
    if stage_set is StageSet.FULLY_FILTERED:
        chain += [
            ("gopher_quality", gopher_quality_filter),
            ("fineweb", fineweb_quality_filter),
            ("gopher_repetition", gopher_repetition_filter),
        ]
    for name, fn in chain:
        words = doc.word_count()
        result = fn(doc, cfg)
        if isinstance(result, tuple):
            doc, decision = result
        else:
            decision = result
        doc.annotate(decision.to_annotation(name))
        stats.record(name, decision.kept, decision.rule, words)
        if not decision.kept:
            return None
    return doc
