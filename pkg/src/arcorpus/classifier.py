"""Linear bag-of-n-grams text classifier and the 0-5 educational scorer.

Word n-grams are hashed into a fixed bucket table; an example is embedded
as the mean of its feature embeddings and classified through a plain
softmax layer trained with SGD and a linearly decayed learning rate.
Training order is part of the determinism contract: a fixed seed gives a
bit-identical model file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.metrics import accuracy_score, f1_score
from sklearn.utils.validation import check_is_fitted

from .corpus_io import Document
from .filters import FilterDecision

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_NGRAM_SEP = "\x1f"


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def featurize(text: str, word_ngram_max: int = 3, bucket_count: int = 1 << 21) -> list[int]:
    """Hashed ids of word 1..n-grams; a multiset, deterministic across runs."""
    words = text.split()
    features: list[int] = []
    for n in range(1, word_ngram_max + 1):
        for i in range(len(words) - n + 1):
            gram = _NGRAM_SEP.join(words[i : i + n])
            features.append(_fnv1a64(gram.encode("utf-8")) % bucket_count)
    return features


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _loss_and_grads(input_emb, output_w, feature_ids, label_idx):
    """Cross-entropy loss and analytic gradients for one example.

    Returns (loss, grad_output, unique_rows, grad_rows); grad_rows[i] is the
    gradient for input_emb[unique_rows[i]]. Shared by training and the
    finite-difference checks.
    """
    rows, counts = np.unique(feature_ids, return_counts=True)
    n = len(feature_ids)
    weights = counts.astype(input_emb.dtype) / n
    h = weights @ input_emb[rows]
    probs = _softmax(output_w @ h)
    loss = -np.log(max(probs[label_idx], np.finfo(probs.dtype).tiny))
    dz = probs.copy()
    dz[label_idx] -= 1
    grad_output = np.outer(dz, h)
    dh = output_w.T @ dz
    grad_rows = np.outer(weights, dh)
    return loss, grad_output, rows, grad_rows


@dataclass
class Prediction:
    label: str
    probs: np.ndarray
    labels: tuple[str, ...]

    def prob(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])


class NgramTextClassifier(BaseEstimator):
    """Supervised linear classifier over hashed word n-gram features."""

    def __init__(
        self,
        word_ngram_max: int = 3,
        embed_dim: int = 64,
        epochs: int = 10,
        learning_rate: float = 0.1,
        bucket_count: int = 1 << 21,
        labels: tuple[str, ...] | None = None,
        seed: int = 0,
    ):
        self.word_ngram_max = word_ngram_max
        self.embed_dim = embed_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.bucket_count = bucket_count
        self.labels = labels
        self.seed = seed

    def fit(self, texts, labels) -> "NgramTextClassifier":
        if self.word_ngram_max < 1:
            raise ValueError("word_ngram_max must be >= 1")
        texts = list(texts)
        labels = list(labels)
        if len(texts) != len(labels):
            raise ValueError("texts and labels must have equal length")
        label_names = tuple(self.labels) if self.labels else tuple(sorted(set(labels)))
        if len(label_names) < 2:
            raise ValueError("need at least two labels")
        label_index = {name: i for i, name in enumerate(label_names)}
        for lab in labels:
            if lab not in label_index:
                raise ValueError(f"example carries unknown label {lab!r}")

        rng = np.random.default_rng(self.seed)
        bound = 1.0 / self.embed_dim
        input_emb = rng.uniform(-bound, bound, size=(self.bucket_count, self.embed_dim)).astype(
            np.float32
        )
        output_w = np.zeros((len(label_names), self.embed_dim), dtype=np.float32)

        examples = [
            (featurize(t, self.word_ngram_max, self.bucket_count), label_index[l])
            for t, l in zip(texts, labels)
        ]
        total_steps = max(1, self.epochs * len(examples))
        step = 0
        losses: list[float] = []
        for _ in range(self.epochs):
            order = rng.permutation(len(examples))
            epoch_loss = 0.0
            seen = 0
            for idx in order:
                feats, y = examples[idx]
                lr = self.learning_rate * (1.0 - step / total_steps)
                step += 1
                if not feats:
                    continue
                loss, grad_out, rows, grad_rows = _loss_and_grads(input_emb, output_w, feats, y)
                output_w -= lr * grad_out
                np.subtract.at(input_emb, rows, (lr * grad_rows).astype(np.float32))
                epoch_loss += float(loss)
                seen += 1
            losses.append(epoch_loss / max(seen, 1))

        self.labels_ = label_names
        self.input_embeddings_ = input_emb
        self.output_weights_ = output_w
        self.epoch_losses_ = losses
        return self

    def predict_one(self, text: str) -> Prediction:
        check_is_fitted(self, "output_weights_")
        feats = featurize(text, self.word_ngram_max, self.bucket_count)
        n_labels = len(self.labels_)
        if not feats:
            probs = np.full(n_labels, 1.0 / n_labels)
        else:
            rows, counts = np.unique(feats, return_counts=True)
            h = (counts / len(feats)) @ self.input_embeddings_[rows]
            probs = _softmax(self.output_weights_ @ h)
        best = int(np.argmax(probs))  # ties resolve to the lower label index
        return Prediction(label=self.labels_[best], probs=probs, labels=self.labels_)

    def predict(self, texts) -> list[str]:
        return [self.predict_one(t).label for t in texts]

    def predict_proba(self, texts) -> np.ndarray:
        return np.stack([self.predict_one(t).probs for t in texts])

    def save(self, path) -> None:
        check_is_fitted(self, "output_weights_")
        config = {
            "word_ngram_max": self.word_ngram_max,
            "embed_dim": self.embed_dim,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "bucket_count": self.bucket_count,
            "labels": list(self.labels_),
            "seed": self.seed,
        }
        blob = json.dumps(config, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4sI", b"ARTC", 1))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(self.input_embeddings_.astype("<f4").tobytes())
            fh.write(self.output_weights_.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "NgramTextClassifier":
        with open(path, "rb") as fh:
            magic, version = struct.unpack("<4sI", fh.read(8))
            if magic != b"ARTC" or version != 1:
                raise ValueError(f"{path}: not a classifier model file")
            (blob_len,) = struct.unpack("<I", fh.read(4))
            config = json.loads(fh.read(blob_len).decode("utf-8"))
            labels = tuple(config.pop("labels"))
            model = cls(labels=labels, **config)
            n_in = model.bucket_count * model.embed_dim
            input_emb = np.frombuffer(fh.read(4 * n_in), dtype="<f4").reshape(
                model.bucket_count, model.embed_dim
            )
            output_w = np.frombuffer(fh.read(4 * len(labels) * model.embed_dim), dtype="<f4")
        model.labels_ = labels
        model.input_embeddings_ = input_emb.copy()
        model.output_weights_ = output_w.reshape(len(labels), model.embed_dim).copy()
        model.epoch_losses_ = []
        return model


def train(data, word_ngram_max=3, embed_dim=64, epochs=10, learning_rate=0.1,
          bucket_count=1 << 21, labels=None, seed: int = 0) -> NgramTextClassifier:
    """Train from (text, label) pairs; unseen labels raise a data error."""
    pairs = list(data)
    texts = [t for t, _ in pairs]
    ys = [l for _, l in pairs]
    clf = NgramTextClassifier(
        word_ngram_max=word_ngram_max,
        embed_dim=embed_dim,
        epochs=epochs,
        learning_rate=learning_rate,
        bucket_count=bucket_count,
        labels=labels,
        seed=seed,
    )
    return clf.fit(texts, ys)


def predict(text: str, model: NgramTextClassifier) -> Prediction:
    return model.predict_one(text)


# --- training-data file: one "__label__<name> text" line per example --------

_LABEL_PREFIX = "__label__"


def read_labeled_file(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if not line.startswith(_LABEL_PREFIX):
                raise ValueError(f"{path}:{lineno}: missing {_LABEL_PREFIX} prefix")
            token, _, text = line.partition(" ")
            yield text, token[len(_LABEL_PREFIX) :]


def write_labeled_file(examples, path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for text, label in examples:
            fh.write(f"{_LABEL_PREFIX}{label} {' '.join(text.split())}\n")
            count += 1
    return count


def evaluate(model: NgramTextClassifier, examples) -> dict:
    """Accuracy and F1 on labeled examples; macro F1 is the headline metric."""
    pairs = list(examples)
    y_true = [label for _, label in pairs]
    y_pred = model.predict([text for text, _ in pairs])
    label_names = list(model.labels_)
    per_label = f1_score(y_true, y_pred, labels=label_names, average=None, zero_division=0)
    return {
        "accuracy_pct": 100.0 * accuracy_score(y_true, y_pred),
        "macro_f1_pct": 100.0
        * f1_score(y_true, y_pred, labels=label_names, average="macro", zero_division=0),
        "per_label_f1_pct": {l: 100.0 * f for l, f in zip(label_names, per_label)},
        "n_examples": len(pairs),
    }


# --- pipeline stages ---------------------------------------------------------


def quality_stage(
    doc: Document, model: NgramTextClassifier, keep_label: str, min_prob: float = 0.5
) -> FilterDecision:
    """Keep iff the classifier picks keep_label with probability >= min_prob."""
    if keep_label not in model.labels_:
        raise ValueError(f"keep_label {keep_label!r} not among model labels {model.labels_}")
    pred = model.predict_one(doc.text)
    metrics = {f"prob_{name}": float(p) for name, p in zip(pred.labels, pred.probs)}
    metrics["keep_prob"] = pred.prob(keep_label)
    if pred.label == keep_label and metrics["keep_prob"] >= min_prob:
        return FilterDecision(True, metrics=metrics)
    return FilterDecision(False, "quality_prob", metrics)


EDU_LABELS = tuple(str(i) for i in range(6))


def edu_stage(
    doc: Document,
    model: NgramTextClassifier | None = None,
    score_annotation: str = "edu_score",
    threshold: int = 2,
) -> FilterDecision:
    """Educational-value gate: scores below the threshold are low quality."""
    if model is not None:
        if tuple(model.labels_) != EDU_LABELS:
            raise ValueError("educational model must carry labels '0'..'5'")
        score = int(model.predict_one(doc.text).label)
    else:
        ann = doc.annotations.get(score_annotation)
        if ann is None or "score" not in ann.metrics:
            raise ValueError(f"document {doc.id} lacks a {score_annotation!r} annotation")
        raw = ann.metrics["score"]
        score = int(raw)
        if score != raw or not 0 <= score <= 5:
            raise ValueError(f"document {doc.id}: educational score {raw!r} outside 0..5")
    metrics = {"score": float(score)}
    if score >= threshold:
        return FilterDecision(True, metrics=metrics)
    return FilterDecision(False, "edu_score", metrics)
