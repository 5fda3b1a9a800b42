"""Answer-shuffling for multiple-choice evaluation sets.

Permuting candidate options (while keeping the gold option's content fixed)
exposes positional bias: a robust model scores the same on every permuted
copy. The default protocol emits the unshuffled dataset plus two permuted
copies; externally produced per-copy accuracies are aggregated as mean and
population standard deviation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from random import Random


@dataclass
class McqItem:
    question: str
    options: list[str]
    gold_index: int

    def __post_init__(self):
        if len(self.options) < 2:
            raise ValueError(
                f"item {self.question[:50]!r} has {len(self.options)} options, need at least 2"
            )
        if not 0 <= self.gold_index < len(self.options):
            raise ValueError(
                f"item {self.question[:50]!r}: gold_index {self.gold_index} out of range"
            )

    @property
    def gold_option(self) -> str:
        return self.options[self.gold_index]


def _permute_item(item: McqItem, rng: Random) -> McqItem:
    n = len(item.options)
    perm = list(range(n))  # perm[j] = source index of the option placed at j
    rng.shuffle(perm)
    options = [item.options[perm[j]] for j in range(n)]
    gold_index = perm.index(item.gold_index)
    return McqItem(question=item.question, options=options, gold_index=gold_index)


def shuffle_mcq(items, num_shuffles: int = 2, seed: int = 0) -> list[list[McqItem]]:
    """The identity dataset plus num_shuffles independently permuted copies.

    Every item of every copy keeps its option multiset and its gold option
    string; only positions (and gold_index) change. Deterministic per seed.
    """
    if num_shuffles < 0:
        raise ValueError("num_shuffles must be >= 0")
    items = list(items)
    master = Random(seed)
    copy_seeds = [master.getrandbits(64) for _ in range(num_shuffles)]
    datasets = [list(items)]
    for copy_seed in copy_seeds:
        rng = Random(copy_seed)
        datasets.append([_permute_item(item, rng) for item in items])
    return datasets


def aggregate_shuffle_scores(accuracies) -> dict[str, float]:
    """Mean and population standard deviation of per-copy accuracies."""
    values = [float(a) for a in accuracies]
    if not values:
        raise ValueError("need at least one accuracy")
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return {"mean": mean, "std": math.sqrt(variance)}


# --- MCQ JSONL: {"question","options","gold_index"} per line -----------------


def read_mcq_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            try:
                yield McqItem(
                    question=obj["question"],
                    options=list(obj["options"]),
                    gold_index=int(obj["gold_index"]),
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc


def write_mcq_jsonl(items, path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {
                        "question": item.question,
                        "options": item.options,
                        "gold_index": item.gold_index,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    return count
