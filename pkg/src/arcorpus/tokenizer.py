"""BPE tokenizer training with pluggable pre-tokenizers, plus mixture
construction and fertility evaluation.

Pre-tokenizers: whitespace (character-level symbols within words), and the
byte-level family (byte alphabet with the standard printable-byte
remapping): plain byte-level, the GPT-4 category split, and a variant that
isolates punctuation as singleton segments.

Vocabulary accounting: ids 0-3 are reserved for the special tokens
(unknown, begin, end, pad) ahead of the base alphabet; ``vocab_size``
counts the base alphabet plus merge outputs only.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from heapq import heapify, heappop, heappush
from pathlib import Path
from random import Random

import regex
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

UNK_ID, BOS_ID, EOS_ID, PAD_ID = 0, 1, 2, 3
_NUM_SPECIALS = 4


class PreTokenizerKind(str, Enum):
    WHITESPACE = "whitespace"
    BYTE_LEVEL = "byte_level"
    GPT4_SPLIT = "gpt4_split"
    PUNCT_SPLIT = "punct_split"


_GPT2_SPLIT = regex.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)
# the published GPT-4 split: letter runs, digit runs capped at 3, punctuation
# runs, and newline-aware whitespace handling
_GPT4_SPLIT = regex.compile(
    r"""'(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}+|\p{N}{1,3}|"""
    r""" ?[^\s\p{L}\p{N}]++[\r\n]*|\s*[\r\n]|\s+(?!\S)|\s+"""
)
_PUNCT_SPLIT = regex.compile(r""" ?\p{L}+| ?\p{N}+|\s+(?!\S)|\s+|.""", regex.DOTALL)


def _byte_to_unicode() -> dict[int, str]:
    """Invertible byte -> printable character map used by byte-level modes."""
    visible = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    mapping = {}
    shift = 0
    for b in range(256):
        if b in visible:
            mapping[b] = chr(b)
        else:
            mapping[b] = chr(256 + shift)
            shift += 1
    return mapping


_BYTE_TO_CHAR = _byte_to_unicode()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}
BYTE_ALPHABET = tuple(_BYTE_TO_CHAR[b] for b in range(256))


def _map_bytes(segment: str) -> tuple[str, ...]:
    return tuple(_BYTE_TO_CHAR[b] for b in segment.encode("utf-8"))


def _unmap_bytes(symbols: str) -> bytes:
    return bytes(_CHAR_TO_BYTE[c] for c in symbols)


def split_segments(text: str, pre: PreTokenizerKind) -> list[str]:
    """Raw text segments before any byte mapping.

    For the byte-level family, concatenating the segments reproduces the
    text exactly; whitespace mode keeps only the words.
    """
    if pre is PreTokenizerKind.WHITESPACE:
        return text.split()
    if pre is PreTokenizerKind.BYTE_LEVEL:
        return _GPT2_SPLIT.findall(text)
    if pre is PreTokenizerKind.GPT4_SPLIT:
        return _GPT4_SPLIT.findall(text)
    if pre is PreTokenizerKind.PUNCT_SPLIT:
        return _PUNCT_SPLIT.findall(text)
    raise ValueError(f"unknown pre-tokenizer {pre!r}")


def pretokenize(text: str, pre: PreTokenizerKind) -> list[tuple[str, ...]]:
    """Symbol sequences fed to BPE: characters for whitespace mode, mapped
    bytes for the byte-level family."""
    segments = split_segments(text, pre)
    if pre is PreTokenizerKind.WHITESPACE:
        return [tuple(seg) for seg in segments]
    return [_map_bytes(seg) for seg in segments]


def _merge_all(word: list[str], left: str, right: str, merged: str) -> list[str]:
    """Replace every left/right adjacency, scanning left to right."""
    out = []
    i = 0
    n = len(word)
    while i < n:
        if i < n - 1 and word[i] == left and word[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return out


class BpeTokenizer(BaseEstimator):
    """Byte-pair tokenizer trained by greedy highest-count merges.

    Ties between equally frequent pairs break to the lexicographically
    smallest (left, right), so training is deterministic; the merge list of
    a smaller vocabulary is a prefix of any larger one trained on the same
    corpus and pre-tokenizer.
    """

    def __init__(
        self,
        pre: PreTokenizerKind | str = PreTokenizerKind.BYTE_LEVEL,
        vocab_size: int = 32_000,
        min_pair_count: int = 1,
    ):
        self.pre = pre
        self.vocab_size = vocab_size
        self.min_pair_count = min_pair_count

    @property
    def pre_kind(self) -> PreTokenizerKind:
        return PreTokenizerKind(self.pre)

    def fit(self, corpus) -> "BpeTokenizer":
        pre = self.pre_kind
        seg_counts: Counter[tuple[str, ...]] = Counter()
        n_texts = 0
        for text in corpus:
            n_texts += 1
            seg_counts.update(pretokenize(text, pre))
        if n_texts == 0 or not seg_counts:
            raise ValueError("cannot train a tokenizer on an empty corpus")

        if pre is PreTokenizerKind.WHITESPACE:
            alphabet = sorted({sym for seg in seg_counts for sym in seg})
        else:
            alphabet = list(BYTE_ALPHABET)
        if self.vocab_size < len(alphabet):
            raise ValueError(
                f"vocab_size {self.vocab_size} is below the base alphabet size {len(alphabet)}"
            )

        words = [list(seg) for seg in seg_counts]
        freqs = list(seg_counts.values())
        pair_counts: dict[tuple[str, str], int] = defaultdict(int)
        pair_words: dict[tuple[str, str], set[int]] = defaultdict(set)
        for wi, (word, freq) in enumerate(zip(words, freqs)):
            for pair in zip(word, word[1:]):
                pair_counts[pair] += freq
                pair_words[pair].add(wi)
        heap = [(-count, pair) for pair, count in pair_counts.items()]
        heapify(heap)

        merges: list[tuple[str, str]] = []
        budget = self.vocab_size - len(alphabet)
        while len(merges) < budget and heap:
            neg, pair = heappop(heap)
            count = pair_counts.get(pair, 0)
            if count != -neg:
                continue  # stale heap entry
            if count < self.min_pair_count or count < 1:
                break
            left, right = pair
            merged = left + right
            merges.append(pair)
            for wi in sorted(pair_words.pop(pair, ())):
                word = words[wi]
                freq = freqs[wi]
                before = Counter(zip(word, word[1:]))
                new_word = _merge_all(word, left, right, merged)
                words[wi] = new_word
                after = Counter(zip(new_word, new_word[1:]))
                for p in set(before) | set(after):
                    delta = after[p] - before[p]
                    if delta == 0:
                        continue
                    pair_counts[p] += delta * freq
                    if pair_counts[p] <= 0:
                        pair_counts.pop(p, None)
                        continue
                    if delta > 0:
                        pair_words[p].add(wi)
                    heappush(heap, (-pair_counts[p], p))
            pair_counts.pop(pair, None)

        vocab: dict[str, int] = {}
        for sym in alphabet:
            vocab[sym] = _NUM_SPECIALS + len(vocab)
        for left, right in merges:
            token = left + right
            if token not in vocab:
                vocab[token] = _NUM_SPECIALS + len(vocab)

        self.vocab_ = vocab
        self.merges_ = merges
        self.ranks_ = {pair: rank for rank, pair in enumerate(merges)}
        self.vocab_size_ = len(vocab)
        self._encode_cache: dict[tuple[str, ...], list[int]] = {}
        return self

    # --- encoding ---------------------------------------------------------

    def _merge_segment(self, symbols: tuple[str, ...]) -> list[str]:
        word = list(symbols)
        ranks = self.ranks_
        while len(word) > 1:
            best_rank = None
            best_pair = None
            for pair in zip(word, word[1:]):
                rank = ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_pair = pair
            if best_pair is None:
                break
            word = _merge_all(word, best_pair[0], best_pair[1], best_pair[0] + best_pair[1])
        return word

    def encode(self, text: str) -> list[int]:
        """Token ids; unknown base symbols map to the reserved unknown id."""
        check_is_fitted(self, "vocab_")
        ids: list[int] = []
        vocab = self.vocab_
        cache = self._encode_cache
        for segment in pretokenize(text, self.pre_kind):
            cached = cache.get(segment)
            if cached is None:
                cached = [vocab.get(tok, UNK_ID) for tok in self._merge_segment(segment)]
                if len(cache) < 1_000_000:
                    cache[segment] = cached
            ids.extend(cached)
        return ids

    def decode(self, ids) -> str:
        """Inverse of encode for byte-level modes; whitespace mode cannot
        recover word boundaries and concatenates tokens."""
        check_is_fitted(self, "vocab_")
        if not hasattr(self, "_id_to_token"):
            self._id_to_token = {i: t for t, i in self.vocab_.items()}
        tokens = [self._id_to_token.get(i, "") for i in ids]
        joined = "".join(tokens)
        if self.pre_kind is PreTokenizerKind.WHITESPACE:
            return joined
        return _unmap_bytes(joined).decode("utf-8", errors="replace")

    def transform(self, texts) -> list[list[int]]:
        return [self.encode(t) for t in texts]

    # --- persistence --------------------------------------------------------
    # Three files: a JSON header naming the pre-tokenizer, a vocab file with
    # one "token<TAB>id" line, and a merges file with one "left right" line
    # per merge in training order. Tokens never contain whitespace.

    def save(self, directory) -> None:
        check_is_fitted(self, "vocab_")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = {
            "format": "arcorpus-bpe",
            "version": 1,
            "pre_tokenizer": self.pre_kind.value,
            "vocab_size": self.vocab_size_,
        }
        (directory / "tokenizer.json").write_text(
            json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        with open(directory / "vocab.txt", "w", encoding="utf-8") as fh:
            for token, idx in sorted(self.vocab_.items(), key=lambda kv: kv[1]):
                fh.write(f"{token}\t{idx}\n")
        with open(directory / "merges.txt", "w", encoding="utf-8") as fh:
            for left, right in self.merges_:
                fh.write(f"{left} {right}\n")

    @classmethod
    def load(cls, directory) -> "BpeTokenizer":
        directory = Path(directory)
        header = json.loads((directory / "tokenizer.json").read_text("utf-8"))
        if header.get("format") != "arcorpus-bpe":
            raise ValueError(f"{directory}: not a tokenizer directory")
        model = cls(pre=header["pre_tokenizer"], vocab_size=header["vocab_size"])
        vocab: dict[str, int] = {}
        with open(directory / "vocab.txt", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                token, _, idx = line.rpartition("\t")
                vocab[token] = int(idx)
        merges = []
        with open(directory / "merges.txt", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                left, _, right = line.partition(" ")
                merges.append((left, right))
        model.vocab_ = vocab
        model.merges_ = merges
        model.ranks_ = {pair: rank for rank, pair in enumerate(merges)}
        model.vocab_size_ = len(vocab)
        model._encode_cache = {}
        return model

    def truncated(self, vocab_size: int) -> "BpeTokenizer":
        """The tokenizer this training run would have produced at a smaller
        vocabulary (merge lists are nested), without retraining."""
        check_is_fitted(self, "vocab_")
        alphabet_size = self.vocab_size_ - len(self.merges_)
        if vocab_size < alphabet_size:
            raise ValueError("cannot truncate below the base alphabet")
        keep = min(vocab_size - alphabet_size, len(self.merges_))
        model = BpeTokenizer(pre=self.pre, vocab_size=vocab_size)
        model.merges_ = self.merges_[:keep]
        model.vocab_ = {
            t: i for t, i in self.vocab_.items() if i < _NUM_SPECIALS + alphabet_size + keep
        }
        model.ranks_ = {pair: rank for rank, pair in enumerate(model.merges_)}
        model.vocab_size_ = len(model.vocab_)
        model._encode_cache = {}
        return model


def train_bpe(corpus, pre: PreTokenizerKind | str, vocab_size: int) -> BpeTokenizer:
    return BpeTokenizer(pre=pre, vocab_size=vocab_size).fit(corpus)


def encode(text: str, model: BpeTokenizer) -> list[int]:
    return model.encode(text)


def decode(ids, model: BpeTokenizer) -> str:
    return model.decode(ids)


# --- training-data mixtures --------------------------------------------------


class MixtureMode(str, Enum):
    ORIGINAL = "original"
    REWEIGHTED = "reweighted"


@dataclass
class MixtureSpec:
    """Named sources with sampling weights.

    In reweighted mode the weights of ``reweight_sources`` (all sources when
    None) are redistributed proportionally to 1/p_i of their original
    proportions, keeping the group's total share and every other source
    unchanged.
    """

    sources: tuple[tuple[str, float], ...]
    mode: MixtureMode = MixtureMode.ORIGINAL
    reweight_sources: frozenset[str] | None = None

    def __post_init__(self):
        if not self.sources:
            raise ValueError("mixture needs at least one source")
        if any(w < 0 for _, w in self.sources):
            raise ValueError("weights must be non-negative")
        total = sum(w for _, w in self.sources)
        if total <= 0:
            raise ValueError("weights must not all be zero")
        self.sources = tuple((name, w / total) for name, w in self.sources)

    def effective_weights(self) -> dict[str, float]:
        weights = dict(self.sources)
        if self.mode is MixtureMode.ORIGINAL:
            return weights
        group = (
            set(weights) if self.reweight_sources is None else set(self.reweight_sources)
        )
        group &= set(weights)
        if not group:
            return weights
        if any(weights[name] == 0 for name in group):
            raise ValueError("cannot reweight a source with zero original proportion")
        group_mass = sum(weights[name] for name in group)
        inv_total = sum(1.0 / weights[name] for name in group)
        for name in group:
            weights[name] = group_mass * (1.0 / weights[name]) / inv_total
        return weights


def build_mixture(
    sources: dict[str, list[str]],
    spec: MixtureSpec,
    seed: int = 0,
    total: int | None = None,
):
    """Sample documents without replacement per source, weight-proportionally.

    A source smaller than its requested share is taken whole with a
    shortfall warning. Deterministic for a given seed.
    """
    names = [name for name, _ in spec.sources]
    missing = [name for name in names if name not in sources]
    if missing:
        raise ValueError(f"mixture spec names unknown sources: {missing}")
    pools = {name: list(sources[name]) for name in names}
    if total is None:
        total = sum(len(pool) for pool in pools.values())
    weights = spec.effective_weights()

    # largest-remainder apportionment keeps the counts summing to the total
    shares = {name: weights[name] * total for name in names}
    counts = {name: int(shares[name]) for name in names}
    leftover = total - sum(counts.values())
    for name in sorted(names, key=lambda n: (shares[n] - counts[n], n), reverse=True):
        if leftover <= 0:
            break
        counts[name] += 1
        leftover -= 1

    rng = Random(seed)
    sampled: list[str] = []
    for name in names:
        pool = pools[name]
        want = counts[name]
        if want > len(pool):
            warnings.warn(
                f"mixture source {name!r} has {len(pool)} documents, "
                f"short of the requested {want}; taking all of it",
                stacklevel=2,
            )
            want = len(pool)
        sampled.extend(rng.sample(pool, want))
    rng.shuffle(sampled)
    return iter(sampled)


# --- fertility -----------------------------------------------------------------


@dataclass
class DomainFertility:
    tokens: int
    words: int

    @property
    def fertility(self) -> float | None:
        # undefined for wordless domains rather than a crash
        if self.words == 0:
            return None
        return self.tokens / self.words


@dataclass
class FertilityReport:
    per_domain: dict[str, DomainFertility]

    def to_dict(self) -> dict:
        return {
            domain: {"tokens": d.tokens, "words": d.words, "fertility": d.fertility}
            for domain, d in self.per_domain.items()
        }


def fertility(corpus: dict[str, "list[str]"], model: BpeTokenizer) -> FertilityReport:
    """Tokens per whitespace word, per domain; words are counted on the raw
    text before any pre-tokenization."""
    report: dict[str, DomainFertility] = {}
    for domain, texts in corpus.items():
        tokens = 0
        words = 0
        for text in texts:
            tokens += len(model.encode(text))
            words += len(text.split())
        report[domain] = DomainFertility(tokens=tokens, words=words)
    return FertilityReport(per_domain=report)
