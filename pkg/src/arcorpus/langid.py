"""Two-step Arabic language filtering.

A cheap script prefilter (presence of the most frequent Arabic letters)
discards non-Arabic-script pages without touching the model; survivors go
through a trainable character n-gram naive Bayes detector.
"""

from __future__ import annotations

import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus_io import Document
from .filters import FilterDecision

# The ten most frequent Arabic letters, in standard frequency order.
ARABIC_TRIGGER_LETTERS = frozenset("اليمونرتبة")

UNKNOWN = "unknown"


@dataclass
class ScriptPrefilter:
    trigger_chars: frozenset[str] = ARABIC_TRIGGER_LETTERS
    min_hits: int = 1

    def __post_init__(self):
        if not self.trigger_chars:
            raise ValueError("trigger_chars must be non-empty")
        if self.min_hits < 1:
            raise ValueError("min_hits must be >= 1")


def prefilter(text: str, pf: ScriptPrefilter | None = None) -> bool:
    """True iff at least min_hits code points of text are trigger letters."""
    if pf is None:
        pf = ScriptPrefilter()
    hits = 0
    trigger = pf.trigger_chars
    for ch in text:
        if ch in trigger:
            hits += 1
            if hits >= pf.min_hits:
                return True
    return False


@dataclass
class LangVerdict:
    language: str
    confidence: float


def _char_ngrams(text: str, order: int) -> Counter:
    text = unicodedata.normalize("NFC", text).casefold()
    return Counter(text[i : i + order] for i in range(len(text) - order + 1))


class CharNgramLanguageId(BaseEstimator):
    """Multinomial naive Bayes over character n-grams with add-alpha smoothing.

    Fitted attributes use a shared n-gram vocabulary (union over languages);
    n-grams outside it are ignored at prediction time. Per-language priors
    are proportional to training corpus size.
    """

    def __init__(self, order: int = 3, alpha: float = 0.01):
        self.order = order
        self.alpha = alpha

    def fit(self, texts, labels) -> "CharNgramLanguageId":
        texts = list(texts)
        labels = list(labels)
        if len(texts) != len(labels):
            raise ValueError("texts and labels must have equal length")
        languages = sorted(set(labels))
        if len(languages) < 2:
            raise ValueError("need at least two languages to train")
        per_lang: dict[str, Counter] = {lang: Counter() for lang in languages}
        doc_counts = Counter(labels)
        for text, lang in zip(texts, labels):
            per_lang[lang].update(_char_ngrams(text, self.order))
        for lang in languages:
            if not per_lang[lang]:
                raise ValueError(f"empty corpus for language {lang!r}")

        vocab = sorted(set().union(*per_lang.values()))
        index = {g: i for i, g in enumerate(vocab)}
        v = len(vocab)
        log_probs = np.empty((v, len(languages)), dtype=np.float64)
        for j, lang in enumerate(languages):
            counts = np.zeros(v, dtype=np.float64)
            for gram, c in per_lang[lang].items():
                counts[index[gram]] = c
            total = counts.sum()
            log_probs[:, j] = np.log(counts + self.alpha) - math.log(total + self.alpha * v)
        total_docs = sum(doc_counts.values())
        priors = np.array(
            [math.log(doc_counts[lang] / total_docs) for lang in languages]
        )

        self.languages_ = languages
        self.vocab_index_ = index
        self.log_probs_ = log_probs
        self.log_priors_ = priors
        self.n_classify_calls_ = 0
        return self

    def smoothed_prob_sums(self) -> dict[str, float]:
        """Per-language probability mass over the shared vocabulary (should be 1)."""
        check_is_fitted(self, "log_probs_")
        sums = np.exp(self.log_probs_).sum(axis=0)
        return dict(zip(self.languages_, sums.tolist()))

    def classify(self, text: str) -> LangVerdict:
        """Posterior argmax over the model's languages; short texts are unknown."""
        check_is_fitted(self, "log_probs_")
        self.n_classify_calls_ += 1
        grams = _char_ngrams(text, self.order)
        if not grams:
            return LangVerdict(UNKNOWN, 0.0)
        scores = self.log_priors_.copy()
        index = self.vocab_index_
        for gram, count in grams.items():
            row = index.get(gram)
            if row is not None:
                scores += count * self.log_probs_[row]
        # normalized posterior of the winner
        scores -= scores.max()
        probs = np.exp(scores)
        probs /= probs.sum()
        best = int(np.argmax(probs))
        return LangVerdict(self.languages_[best], float(probs[best]))

    def predict(self, texts) -> list[str]:
        return [self.classify(t).language for t in texts]

    def predict_proba(self, texts) -> np.ndarray:
        check_is_fitted(self, "log_probs_")
        out = np.zeros((len(texts), len(self.languages_)))
        for i, text in enumerate(texts):
            grams = _char_ngrams(text, self.order)
            scores = self.log_priors_.copy()
            for gram, count in grams.items():
                row = self.vocab_index_.get(gram)
                if row is not None:
                    scores += count * self.log_probs_[row]
            scores -= scores.max()
            probs = np.exp(scores)
            out[i] = probs / probs.sum()
        return out

    def save(self, path) -> None:
        check_is_fitted(self, "log_probs_")
        tables = {}
        for j, lang in enumerate(self.languages_):
            col = self.log_probs_[:, j]
            tables[lang] = {g: col[i] for g, i in self.vocab_index_.items()}
        payload = {
            "format": "arcorpus-langid",
            "version": 1,
            "order": self.order,
            "alpha": self.alpha,
            "languages": self.languages_,
            "log_priors": dict(zip(self.languages_, self.log_priors_.tolist())),
            "tables": tables,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "CharNgramLanguageId":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "arcorpus-langid":
            raise ValueError(f"{path}: not a language-id model file")
        model = cls(order=payload["order"], alpha=payload["alpha"])
        languages = payload["languages"]
        vocab = sorted({g for table in payload["tables"].values() for g in table})
        index = {g: i for i, g in enumerate(vocab)}
        log_probs = np.empty((len(vocab), len(languages)), dtype=np.float64)
        for j, lang in enumerate(languages):
            table = payload["tables"][lang]
            for g, i in index.items():
                log_probs[i, j] = table[g]
        model.languages_ = languages
        model.vocab_index_ = index
        model.log_probs_ = log_probs
        model.log_priors_ = np.array([payload["log_priors"][lang] for lang in languages])
        model.n_classify_calls_ = 0
        return model


def train_langid(corpora: dict[str, list[str]], order: int = 3, alpha: float = 0.01) -> CharNgramLanguageId:
    """Train the detector from per-language corpora (>= 2 languages, none empty)."""
    if len(corpora) < 2:
        raise ValueError("need at least two languages to train")
    texts, labels = [], []
    for lang, corpus in corpora.items():
        corpus = list(corpus)
        if not corpus:
            raise ValueError(f"empty corpus for language {lang!r}")
        texts.extend(corpus)
        labels.extend([lang] * len(corpus))
    return CharNgramLanguageId(order=order, alpha=alpha).fit(texts, labels)


def classify(text: str, model: CharNgramLanguageId) -> LangVerdict:
    return model.classify(text)


def language_stage(
    doc: Document,
    pf: ScriptPrefilter | None = None,
    model: CharNgramLanguageId | None = None,
    min_conf: float = 0.65,
    cc_hint: list[str] | None = None,
    arabic_code: str = "ar",
) -> FilterDecision:
    """Keep a document iff it is confidently Arabic.

    The crawl-metadata hint and the script prefilter both short-circuit the
    model; the detector only runs on pages that pass the cheap checks.
    """
    if cc_hint is not None and arabic_code not in cc_hint:
        return FilterDecision(False, "cc_hint_miss", {"prefilter_pass": 0.0})
    if not prefilter(doc.text, pf):
        return FilterDecision(False, "no_arabic_script", {"prefilter_pass": 0.0})
    if model is None:
        raise ValueError("language_stage needs a trained model once the prefilter passes")
    verdict = model.classify(doc.text)
    metrics = {"prefilter_pass": 1.0, "confidence": verdict.confidence}
    if verdict.language != arabic_code:
        return FilterDecision(False, "not_arabic", metrics)
    if verdict.confidence < min_conf:
        return FilterDecision(False, "low_confidence", metrics)
    return FilterDecision(True, metrics=metrics)
